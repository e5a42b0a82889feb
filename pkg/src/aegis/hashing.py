from Crypto.Hash import keccak

WORD = 1 << 256
MASK = WORD - 1


def keccak256(data: bytes) -> bytes:
    return keccak.new(digest_bits=256, data=bytes(data)).digest()


def to_word(v: int) -> bytes:
    return (v & MASK).to_bytes(32, "big")


def from_bytes(b: bytes) -> int:
    return int.from_bytes(b, "big")


def hex_int(v: int) -> str:
    return hex(v)


def hex_bytes(b: bytes) -> str:
    return "0x" + bytes(b).hex()


def parse_hex_int(s: str) -> int:
    if not isinstance(s, str) or not s.startswith("0x"):
        raise ValueError(f"expected 0x-prefixed hex, got {s!r}")
    return int(s, 16) if len(s) > 2 else 0


def parse_hex_bytes(s: str) -> bytes:
    if not isinstance(s, str) or not s.startswith("0x"):
        raise ValueError(f"expected 0x-prefixed hex, got {s!r}")
    return bytes.fromhex(s[2:])
