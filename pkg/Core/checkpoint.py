# ============================================================================
# checkpoint.py - Flat parameter container for LosaTAL models
#
# Layout:
#   losa-ckpt-v1\n
#   seed <int>\n
#   mode <losa|head_only|full_backbone|in_backbone>\n
#   params <count>\n
#   then per parameter: "<path> <d1,d2,...>\n" followed by its little-endian
#   float64 payload (prod(shape) * 8 bytes). Parameters appear in model order.
# ============================================================================

import numpy as np

from Core.constants import CHECKPOINT_FORMAT
from Core.errors import CheckpointError, CheckpointMismatchError
from Core.log_utils import log


def save_checkpoint(model, path, seed):
    named = list(model.named_parameters())
    with open(path, "wb") as f:
        f.write(f"{CHECKPOINT_FORMAT}\nseed {int(seed)}\nmode {model.mode}\nparams {len(named)}\n".encode("ascii"))
        for name, tensor in named:
            shape = ",".join(str(d) for d in tensor.shape)
            f.write(f"{name} {shape}\n".encode("ascii"))
            f.write(tensor.data.astype("<f8").tobytes())
    log(f"Saved checkpoint with {len(named)} tensors to {path}")


def _header_value(f, key):
    line = f.readline().decode("ascii", errors="replace").rstrip("\n")
    parts = line.split(" ", 1)
    if len(parts) != 2 or parts[0] != key:
        raise CheckpointError(f"checkpoint header: expected '{key} <value>', got '{line}'")
    return parts[1]


def load_checkpoint(path):
    # -> (header dict, {path: ndarray})
    try:
        f = open(path, "rb")
    except OSError as e:
        raise CheckpointError(f"cannot open checkpoint {path}: {e}") from e
    with f:
        version = f.readline().decode("ascii", errors="replace").rstrip("\n")
        if version != CHECKPOINT_FORMAT:
            raise CheckpointError(f"checkpoint format '{version}' is not '{CHECKPOINT_FORMAT}'")
        try:
            header = {"seed": int(_header_value(f, "seed")), "mode": _header_value(f, "mode")}
            count = int(_header_value(f, "params"))
        except ValueError as e:
            raise CheckpointError(f"checkpoint header is malformed: {e}") from e
        tensors = {}
        for _ in range(count):
            line = f.readline().decode("ascii", errors="replace").rstrip("\n")
            name, _, dims = line.rpartition(" ")
            try:
                shape = tuple(int(d) for d in dims.split(",") if d)
            except ValueError as e:
                raise CheckpointError(f"checkpoint entry '{line}' has a bad shape") from e
            nbytes = int(np.prod(shape)) * 8
            raw = f.read(nbytes)
            if not name or len(raw) != nbytes:
                raise CheckpointError(f"checkpoint entry '{line}' is truncated")
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return header, tensors


def restore(model, path):
    header, tensors = load_checkpoint(path)
    if header["mode"] != model.mode:
        raise CheckpointMismatchError(f"checkpoint was trained in mode '{header['mode']}', "
                                      f"config builds '{model.mode}'")
    named = dict(model.named_parameters())
    missing = sorted(set(named) - set(tensors))
    extra = sorted(set(tensors) - set(named))
    if missing or extra:
        raise CheckpointMismatchError(f"parameter paths differ: missing {missing[:5]}, unexpected {extra[:5]}")
    for name, tensor in named.items():
        if tensors[name].shape != tensor.shape:
            raise CheckpointMismatchError(f"'{name}': checkpoint shape {tensors[name].shape} "
                                          f"vs model shape {tensor.shape}")
        tensor.data = tensors[name].copy()
    log(f"Restored {len(named)} tensors from {path}")
    return header
