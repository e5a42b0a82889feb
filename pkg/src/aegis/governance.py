"""Block-clocked commit-reveal voting over the active pattern set.

A proposal opened at block ``t_p`` takes commitments in ``[t_p, t_c)`` and
reveals in ``[t_c, t_r)``, where ``t_c = t_p + commit_window`` and
``t_r = t_c + reveal_window``. Windows, deposit and the voter list are
snapshotted when the proposal opens.
"""

from __future__ import annotations

import json
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .dsl.corpus import builtin_by_name, split_header
from .dsl.parser import parse_pattern
from .dsl.render import pattern_id
from .hashing import keccak256, parse_hex_int

ADD = "ADD"
REMOVE = "REMOVE"
OPEN = "OPEN"
ACCEPTED = "ACCEPTED"
REJECTED = "REJECTED"
EXPIRED = "EXPIRED"


class GovernanceError(Exception):
    pass


class DuplicateProposal(GovernanceError):
    pass


class PatternNotActive(GovernanceError):
    pass


class UnknownProposal(GovernanceError):
    pass


class NotEligible(GovernanceError):
    pass


class WrongDeposit(GovernanceError):
    pass


class CommitClosed(GovernanceError):
    pass


class AlreadyCommitted(GovernanceError):
    pass


class NoCommitment(GovernanceError):
    pass


class RevealClosed(GovernanceError):
    pass


class HashMismatch(GovernanceError):
    pass


class NotOwner(GovernanceError):
    pass


@dataclass(frozen=True)
class Event:
    block: int
    name: str  # PatternAdded, PatternRemoved, ProposalRejected, ProposalExpired
    id: bytes
    text: str | None = None

    def to_json(self) -> str:
        d = {"block": self.block, "event": self.name, "id": "0x" + self.id.hex()}
        if self.text is not None:
            d["text"] = self.text
        return json.dumps(d, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "Event":
        d = json.loads(line)
        return cls(d["block"], d["event"], bytes.fromhex(d["id"][2:]), d.get("text"))


def commitment(vote_id: bytes, vote: bool, nonce: bytes | int) -> bytes:
    if isinstance(nonce, int):
        nonce = nonce.to_bytes(32, "big")
    if len(nonce) != 32:
        raise ValueError("nonce must be 32 bytes")
    return keccak256(vote_id + (b"\x01" if vote else b"\x00") + nonce)


def text_pattern_id(text: str) -> bytes:
    return pattern_id(parse_pattern(split_header(text)[1]))


@dataclass
class Proposal:
    vote_id: bytes
    kind: str
    pattern_text: str
    start_block: int
    commit_window: int
    reveal_window: int
    deposit: int
    voters: frozenset[int]
    commitments: dict[int, bytes] = field(default_factory=dict)
    revealed: dict[int, bool] = field(default_factory=dict)
    outcome: str = OPEN
    closed: bool = False  # past t_r, unrevealed deposits forfeited

    @property
    def t_c(self) -> int:
        return self.start_block + self.commit_window

    @property
    def t_r(self) -> int:
        return self.t_c + self.reveal_window

    @property
    def threshold(self) -> int:
        return len(self.voters) // 2 + 1

    def held(self) -> int:
        if self.closed:
            return 0
        return self.deposit * (len(self.commitments) - len(self.revealed))


@dataclass
class GovernanceState:
    owner: int
    voters: set[int] = field(default_factory=set)
    deposit: int = 10**18
    commit_window: int = 10
    reveal_window: int = 10
    current_block: int = 0
    proposals: dict[bytes, Proposal] = field(default_factory=dict)
    active_patterns: list[str] = field(default_factory=list)
    held_deposits: int = 0
    treasury: int = 0
    refunds: dict[int, int] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    history: list[Proposal] = field(default_factory=list)

    # -- proposals ----------------------------------------------------------

    def _active_index(self, pid: bytes) -> int | None:
        for i, text in enumerate(self.active_patterns):
            if text_pattern_id(text) == pid:
                return i
        return None

    def _open(self, kind: str, text: str) -> bytes:
        vid = text_pattern_id(text)
        old = self.proposals.get(vid)
        if old is not None and not old.closed:
            raise DuplicateProposal(f"proposal 0x{vid.hex()} is still running")
        active = self._active_index(vid) is not None
        if kind == ADD and active:
            raise DuplicateProposal(f"pattern 0x{vid.hex()} is already active")
        if kind == REMOVE and not active:
            raise PatternNotActive(f"pattern 0x{vid.hex()} is not active")
        if old is not None:
            self.history.append(old)
        self.proposals[vid] = Proposal(
            vid, kind, text, self.current_block, self.commit_window,
            self.reveal_window, self.deposit, frozenset(self.voters),
        )
        return vid

    def add_proposal(self, proposer: int, pattern_text: str) -> bytes:
        return self._open(ADD, pattern_text)

    def remove_proposal(self, proposer: int, pattern_text: str) -> bytes:
        return self._open(REMOVE, pattern_text)

    def _get(self, vote_id: bytes) -> Proposal:
        p = self.proposals.get(vote_id)
        if p is None:
            raise UnknownProposal(f"no proposal 0x{vote_id.hex()}")
        return p

    # -- voting ------------------------------------------------------------------

    def commit_to_vote(self, voter: int, vote_id: bytes, commitment_hash: bytes, sent_value: int) -> None:
        p = self._get(vote_id)
        if voter not in p.voters:
            raise NotEligible(f"0x{voter:x} may not vote on this proposal")
        if p.outcome != OPEN or not p.start_block <= self.current_block < p.t_c:
            raise CommitClosed(f"commit window closed at block {p.t_c}")
        if sent_value != p.deposit:
            raise WrongDeposit(f"deposit is {p.deposit}, got {sent_value}")
        if voter in p.commitments:
            raise AlreadyCommitted(f"0x{voter:x} already committed")
        p.commitments[voter] = bytes(commitment_hash)
        self.held_deposits += p.deposit

    def reveal_vote(self, voter: int, vote_id: bytes, vote: bool, nonce: bytes | int) -> list[Event]:
        p = self._get(vote_id)
        if voter not in p.commitments:
            raise NoCommitment(f"0x{voter:x} has no commitment")
        if not p.t_c <= self.current_block < p.t_r or p.closed:
            raise RevealClosed(f"reveal window is [{p.t_c}, {p.t_r})")
        if voter in p.revealed:
            raise NoCommitment(f"0x{voter:x} already revealed")
        if commitment(vote_id, vote, nonce) != p.commitments[voter]:
            raise HashMismatch("reveal does not match the commitment")
        p.revealed[voter] = vote
        self.held_deposits -= p.deposit
        self.refunds[voter] = self.refunds.get(voter, 0) + p.deposit
        return self._tally(p)

    def _tally(self, p: Proposal) -> list[Event]:
        if p.outcome != OPEN:
            return []
        yes = sum(1 for v in p.revealed.values() if v)
        no = len(p.revealed) - yes
        out = []
        if yes >= p.threshold:
            p.outcome = ACCEPTED
            if p.kind == ADD:
                self.active_patterns.append(p.pattern_text)
                out.append(Event(self.current_block, "PatternAdded", p.vote_id, p.pattern_text))
            else:
                i = self._active_index(p.vote_id)
                if i is not None:
                    del self.active_patterns[i]
                out.append(Event(self.current_block, "PatternRemoved", p.vote_id))
        elif no >= p.threshold:
            p.outcome = REJECTED
            out.append(Event(self.current_block, "ProposalRejected", p.vote_id))
        self.events.extend(out)
        return out

    def advance_block(self, n: int = 1) -> list[Event]:
        if n < 1:
            raise ValueError("advance needs n >= 1")
        self.current_block += n
        out = []
        for p in sorted(self.proposals.values(), key=lambda p: (p.t_r, p.vote_id)):
            if p.closed or self.current_block < p.t_r:
                continue
            if p.outcome == OPEN:
                p.outcome = EXPIRED
                out.append(Event(p.t_r, "ProposalExpired", p.vote_id))
            forfeit = p.held()
            self.held_deposits -= forfeit
            self.treasury += forfeit
            p.closed = True
        self.events.extend(out)
        return out

    # -- admin ---------------------------------------------------------------------

    def _owner_only(self, caller: int) -> None:
        if caller != self.owner:
            raise NotOwner(f"0x{caller:x} is not the owner")

    def transfer_ownership(self, new_owner: int, caller: int) -> None:
        self._owner_only(caller)
        self.owner = new_owner

    def change_voting_windows(self, commit: int, reveal: int, deposit: int, caller: int) -> None:
        self._owner_only(caller)
        if commit < 1 or reveal < 1 or deposit < 0:
            raise ValueError("windows must be >= 1 block and the deposit >= 0")
        self.commit_window, self.reveal_window, self.deposit = commit, reveal, deposit

    def set_voters(self, voters: Iterable[int], caller: int) -> None:
        self._owner_only(caller)
        self.voters = set(voters)

    def expected_held(self) -> int:
        return sum(p.held() for p in self.proposals.values())


def replay_events(events: Iterable[Event]) -> list[str]:
    """Rebuild the active pattern texts from an event log."""
    active: list[tuple[bytes, str]] = []
    for ev in events:
        if ev.name == "PatternAdded":
            active.append((ev.id, ev.text))
        elif ev.name == "PatternRemoved":
            active = [(pid, t) for pid, t in active if pid != ev.id]
    return [t for _, t in active]


def read_event_log(path) -> list[Event]:
    with open(path, encoding="utf-8") as fp:
        return [Event.from_json(line) for line in fp if line.strip()]


def write_event_log(events: Iterable[Event], fp: IO[str]) -> None:
    for ev in events:
        fp.write(ev.to_json() + "\n")


# -- scripts ---------------------------------------------------------------------------


class ScriptError(ValueError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


@dataclass
class ScriptResult:
    state: GovernanceState
    errors: list[tuple[int, GovernanceError]]


DEFAULT_OWNER = 0x0A11CE


def _addr(tok: str) -> int:
    return parse_hex_int(tok) if tok.startswith("0x") else int(tok)


def _int(tok: str) -> int:
    return int(tok, 0)


def _vote(tok: str) -> bool:
    if tok not in ("yes", "no"):
        raise ValueError(f"vote must be yes or no, not {tok!r}")
    return tok == "yes"


def _nonce(tok: str) -> bytes:
    if tok.startswith("0x") and len(tok) == 66:
        return bytes.fromhex(tok[2:])
    return int(tok, 0).to_bytes(32, "big")


def _pattern_text(arg: str, base: Path) -> str:
    if arg.startswith("builtin:"):
        src = builtin_by_name().get(arg[len("builtin:") :])
        if src is None:
            raise ValueError(f"no built-in pattern {arg!r}")
        return src.text
    return (base / arg).read_text(encoding="utf-8")


def run_script(lines: Iterable[str], base_dir=".", state: GovernanceState | None = None) -> ScriptResult:
    """Run a governance script.

    Lines: ``init <owner> [deposit commit reveal]``, ``voters <caller> <addr>...``,
    ``windows <caller> <commit> <reveal> <deposit>``, ``transfer <caller> <new>``,
    ``propose-add <file>``, ``propose-remove <file>``,
    ``commit <voter> <voteID> <hash|yes:NONCE|no:NONCE> [value]``,
    ``reveal <voter> <voteID> <yes|no> <nonce>``, ``advance <n>``.
    ``<file>`` may be ``builtin:<name>``; ``<voteID>`` may be ``last``.
    Syntax errors raise ScriptError; state-machine errors are collected and
    the script carries on.
    """
    base = Path(base_dir)
    st = state or GovernanceState(DEFAULT_OWNER)
    errors: list[tuple[int, GovernanceError]] = []
    last: bytes | None = None

    def vote_id(tok: str) -> bytes:
        if tok == "last":
            if last is None:
                raise ValueError("no proposal yet")
            return last
        return bytes.fromhex(tok[2:] if tok.startswith("0x") else tok)

    for line_no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            cmd, *args = shlex.split(line)
        except ValueError as exc:
            raise ScriptError(line_no, str(exc)) from None
        try:
            if cmd == "init":
                st.owner = _addr(args[0])
                if len(args) > 1:
                    st.deposit, st.commit_window, st.reveal_window = map(_int, args[1:4])
            elif cmd == "voters":
                st.set_voters([_addr(a) for a in args[1:]], _addr(args[0]))
            elif cmd == "windows":
                st.change_voting_windows(_int(args[1]), _int(args[2]), _int(args[3]), _addr(args[0]))
            elif cmd == "transfer":
                st.transfer_ownership(_addr(args[1]), _addr(args[0]))
            elif cmd in ("propose-add", "propose-remove"):
                text = _pattern_text(args[0], base)
                proposer = _addr(args[1]) if len(args) > 1 else 0
                if cmd == "propose-add":
                    last = st.add_proposal(proposer, text)
                else:
                    last = st.remove_proposal(proposer, text)
            elif cmd == "commit":
                vid = vote_id(args[1])
                h = args[2]
                if h.startswith(("yes:", "no:")):
                    v, _, n = h.partition(":")
                    digest = commitment(vid, v == "yes", _nonce(n))
                else:
                    digest = bytes.fromhex(h[2:] if h.startswith("0x") else h)
                p = st.proposals.get(vid)
                value = _int(args[3]) if len(args) > 3 else (p.deposit if p else st.deposit)
                st.commit_to_vote(_addr(args[0]), vid, digest, value)
            elif cmd == "reveal":
                st.reveal_vote(_addr(args[0]), vote_id(args[1]), _vote(args[2]), _nonce(args[3]))
            elif cmd == "advance":
                st.advance_block(_int(args[0]))
            else:
                raise ScriptError(line_no, f"unknown command {cmd!r}")
        except GovernanceError as exc:
            errors.append((line_no, exc))
        except ScriptError:
            raise
        except (IndexError, ValueError, OSError) as exc:
            raise ScriptError(line_no, f"{cmd}: {exc or 'missing argument'}") from None
    return ScriptResult(st, errors)
