"""Self-describing checkpoint container with deterministic bytes.

Layout: the 8-byte magic ``CGCKPT1\\n``, an 8-byte little-endian header
length, a UTF-8 JSON header, then the raw little-endian array payload.
The header maps ``params.<group>.<name>`` to shape, dtype and byte
offset within the payload and carries the config echo and epoch. Keys
are sorted and no timestamps are embedded, so identical state produces
identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import ndtape as nt

MAGIC = b"CGCKPT1\n"


def save_checkpoint(path: str, groups: dict, config: dict, epoch: int, extra: dict | None = None) -> None:
    """Write named parameter groups (ParamStore or dict of arrays) to path."""
    entries = {}
    payload = bytearray()
    for gname in sorted(groups):
        group = groups[gname]
        items = group.items() if hasattr(group, "items") else group
        for pname, tensor in sorted(items, key=lambda kv: kv[0]):
            arr = tensor.values if isinstance(tensor, nt.Tensor) else np.asarray(tensor)
            arr = np.ascontiguousarray(arr)
            key = f"{gname}.{pname}"
            entries[key] = {
                "shape": list(arr.shape),
                "dtype": arr.dtype.name,
                "offset": len(payload),
                "nbytes": arr.nbytes,
            }
            payload.extend(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    header = {
        "format": "contragen-checkpoint",
        "version": 1,
        "epoch": int(epoch),
        "config": config,
        "params": entries,
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path: str):
    """Return (groups, header) where groups maps name -> dict of arrays."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path} is not a contragen checkpoint")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    groups: dict[str, dict[str, np.ndarray]] = {}
    for key, meta in header["params"].items():
        gname, pname = key.split(".", 1)
        dt = np.dtype(meta["dtype"]).newbyteorder("<")
        arr = np.frombuffer(payload, dtype=dt, count=int(np.prod(meta["shape"], dtype=np.int64)) if meta["shape"] else 1,
                            offset=meta["offset"]).reshape(meta["shape"]).astype(meta["dtype"])
        groups.setdefault(gname, {})[pname] = arr
    return groups, header


def params_from_arrays(arrays: dict[str, np.ndarray], requires_grad: bool = True) -> nt.ParamStore:
    store = nt.ParamStore()
    for name in sorted(arrays):
        store.add(name, nt.Tensor(arrays[name], requires_grad=requires_grad, dtype=arrays[name].dtype))
    return store
