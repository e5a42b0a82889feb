from __future__ import annotations

from dataclasses import dataclass, field

from ..hashing import keccak256

# Deploys from test setup come from this address; it is not an account.
FAUCET = 0xFA0CE7


@dataclass
class Account:
    balance: int = 0
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "Account":
        return Account(self.balance, self.code, dict(self.storage))


@dataclass
class WorldState:
    accounts: dict[int, Account] = field(default_factory=dict)
    killed: set[int] = field(default_factory=set)
    nonces: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "WorldState":
        return WorldState(
            {a: acc.copy() for a, acc in self.accounts.items()},
            set(self.killed),
            dict(self.nonces),
        )

    def account(self, addr: int) -> Account:
        acc = self.accounts.get(addr)
        if acc is None:
            acc = self.accounts[addr] = Account()
        return acc

    def balance(self, addr: int) -> int:
        acc = self.accounts.get(addr)
        return acc.balance if acc else 0

    def storage_at(self, addr: int, slot: int) -> int:
        acc = self.accounts.get(addr)
        return acc.storage.get(slot, 0) if acc else 0

    def code_at(self, addr: int) -> bytes:
        acc = self.accounts.get(addr)
        return acc.code if acc else b""

    def total_ether(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    def next_address(self, creator: int) -> int:
        nonce = self.nonces.get(creator, 0)
        self.nonces[creator] = nonce + 1
        return contract_address(creator, nonce)

    def state_hash(self) -> bytes:
        """Digest of balances, code, storage and the killed set (nonces excluded)."""
        parts = []
        for addr in sorted(self.accounts):
            acc = self.accounts[addr]
            slots = b"".join(
                k.to_bytes(32, "big") + v.to_bytes(32, "big")
                for k, v in sorted(acc.storage.items())
                if v
            )
            if not (acc.balance or acc.code or slots):
                continue
            parts.append(
                addr.to_bytes(20, "big")
                + acc.balance.to_bytes(32, "big")
                + keccak256(acc.code)
                + keccak256(slots)
            )
        parts.append(b"".join(a.to_bytes(20, "big") for a in sorted(self.killed)))
        return keccak256(b"".join(parts))


def contract_address(creator: int, nonce: int) -> int:
    digest = keccak256(creator.to_bytes(20, "big") + nonce.to_bytes(32, "big"))
    return int.from_bytes(digest[12:], "big")


def deploy(
    world: WorldState,
    code: bytes,
    endowment: int = 0,
    deployer: int = FAUCET,
    storage: dict[int, int] | None = None,
) -> int:
    """Install runtime ``code`` at a fresh address, minting ``endowment`` wei."""
    addr = world.next_address(deployer)
    world.accounts[addr] = Account(endowment, bytes(code), dict(storage or {}))
    return addr


def fund(world: WorldState, addr: int, amount: int) -> None:
    world.account(addr).balance += amount
