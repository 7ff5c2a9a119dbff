"""Configuration options for the qeaes module."""

CONFIG = {
    "out of range warnings": True,
    "constant time sbox": False,
    "whitening": "direct",
    "event log": None,
}
