"""SGSW weight container: bit-exact serialization of a trained denoiser.

Layout: magic "SGSW" (4 bytes), version u32 LE, header-length u64 LE,
UTF-8 JSON header {arch: {...}, alpha_bar: [...], tensors: [{name,
shape, dtype:"f32", offset, nbytes}, ...]}, then a raw little-endian
float32 payload.  Tensor offsets are relative to the start of the
payload (i.e. byte 16 + header-length of the file).
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import WeightFormatError, WeightIOError, WeightManifestError

MAGIC = b"SGSW"
VERSION = 1

ARCH_KEYS = (
    "in_channels",
    "out_channels",
    "base_width",
    "encoder_depths",
    "middle_depth",
    "decoder_depths",
    "groups",
    "time_embed_dim",
)


def normalize_arch(arch: dict) -> dict:
    missing = [k for k in ARCH_KEYS if k not in arch]
    if missing:
        raise WeightManifestError(f"architecture descriptor missing keys: {missing}")
    out = {
        "in_channels": int(arch["in_channels"]),
        "out_channels": int(arch["out_channels"]),
        "base_width": int(arch["base_width"]),
        "encoder_depths": [int(d) for d in arch["encoder_depths"]],
        "middle_depth": int(arch["middle_depth"]),
        "decoder_depths": [int(d) for d in arch["decoder_depths"]],
        "groups": int(arch["groups"]),
        "time_embed_dim": int(arch["time_embed_dim"]),
    }
    if len(out["encoder_depths"]) != len(out["decoder_depths"]):
        raise WeightManifestError("encoder/decoder stage counts must match")
    if out["time_embed_dim"] % 2 != 0:
        raise WeightManifestError("time_embed_dim must be even")
    return out


def stage_widths(arch: dict):
    """Encoder stage widths, middle width, decoder stage widths."""
    base = arch["base_width"]
    S = len(arch["encoder_depths"])
    enc = [base * 2**s for s in range(S)]
    mid = base * 2**S
    dec = [base * 2 ** (S - 1 - s) for s in range(S)]
    return enc, mid, dec


def _block_plan(prefix: str, width: int, temb_dim: int):
    return [
        (f"{prefix}.norm1.weight", (width,)),
        (f"{prefix}.norm1.bias", (width,)),
        (f"{prefix}.conv1.weight", (width, width, 3, 3)),
        (f"{prefix}.conv1.bias", (width,)),
        (f"{prefix}.cond2.weight", (3 * width, temb_dim)),
        (f"{prefix}.cond2.bias", (3 * width,)),
        (f"{prefix}.conv2.weight", (width, width, 3, 3)),
        (f"{prefix}.conv2.bias", (width,)),
    ]


def layer_plan(arch: dict):
    """Ordered (name, shape) manifest for every tensor of the network."""
    arch = normalize_arch(arch)
    D = arch["time_embed_dim"]
    enc_w, mid_w, dec_w = stage_widths(arch)
    plan = [
        ("time.fc1.weight", (D, D)),
        ("time.fc1.bias", (D,)),
        ("time.fc2.weight", (D, D)),
        ("time.fc2.bias", (D,)),
        ("stem.weight", (enc_w[0], arch["in_channels"], 3, 3)),
        ("stem.bias", (enc_w[0],)),
    ]
    for s, depth in enumerate(arch["encoder_depths"]):
        for b in range(depth):
            plan += _block_plan(f"enc{s}.block{b}", enc_w[s], D)
        down_out = enc_w[s + 1] if s + 1 < len(enc_w) else mid_w
        plan += [
            (f"enc{s}.down.weight", (down_out, enc_w[s], 3, 3)),
            (f"enc{s}.down.bias", (down_out,)),
        ]
    for b in range(arch["middle_depth"]):
        plan += _block_plan(f"mid.block{b}", mid_w, D)
    prev = mid_w
    for s, depth in enumerate(arch["decoder_depths"]):
        w = dec_w[s]
        plan += [
            (f"dec{s}.up.weight", (w, prev, 3, 3)),
            (f"dec{s}.up.bias", (w,)),
            (f"dec{s}.fuse.weight", (w, 2 * w, 3, 3)),
            (f"dec{s}.fuse.bias", (w,)),
        ]
        for b in range(depth):
            plan += _block_plan(f"dec{s}.block{b}", w, D)
        prev = w
    plan += [
        ("head.norm.weight", (enc_w[0],)),
        ("head.norm.bias", (enc_w[0],)),
        ("head.conv.weight", (arch["out_channels"], enc_w[0], 3, 3)),
        ("head.conv.bias", (arch["out_channels"],)),
    ]
    return plan


def write_sgsw(path, arch: dict, alpha_bar: np.ndarray, tensors: dict) -> None:
    """Write the container; tensors maps name -> float32 array per layer_plan."""
    arch = normalize_arch(arch)
    plan = layer_plan(arch)
    names = [n for n, _ in plan]
    if set(names) != set(tensors):
        raise WeightManifestError("tensor set does not match the architecture plan")
    manifest = []
    offset = 0
    blobs = []
    for name in sorted(names):
        arr = np.ascontiguousarray(np.asarray(tensors[name], dtype="<f4"))
        want = dict(plan)[name]
        if tuple(arr.shape) != tuple(want):
            raise WeightManifestError(f"{name}: shape {arr.shape} != declared {want}")
        nbytes = arr.size * 4
        manifest.append(
            {"name": name, "shape": list(arr.shape), "dtype": "f32",
             "offset": offset, "nbytes": nbytes}
        )
        blobs.append(arr.tobytes())
        offset += nbytes
    header = {
        "arch": arch,
        "alpha_bar": [float(a) for a in np.asarray(alpha_bar, dtype=np.float64)],
        "tensors": manifest,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(hbytes)))
        f.write(hbytes)
        for b in blobs:
            f.write(b)


def read_sgsw(path):
    """Read and fully validate a container; returns (arch, alpha_bar, tensors)."""
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) < 16:
            raise WeightIOError(f"{path}: truncated header")
        if head[:4] != MAGIC:
            raise WeightFormatError(f"{path}: bad magic {head[:4]!r}")
        (version,) = struct.unpack("<I", head[4:8])
        if version != VERSION:
            raise WeightFormatError(f"{path}: unknown version {version}")
        (hlen,) = struct.unpack("<Q", head[8:16])
        hbytes = f.read(hlen)
        if len(hbytes) < hlen:
            raise WeightIOError(f"{path}: truncated JSON header")
        try:
            header = json.loads(hbytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise WeightFormatError(f"{path}: unparseable header: {e}") from e
        payload = f.read()

    for key in ("arch", "alpha_bar", "tensors"):
        if key not in header:
            raise WeightManifestError(f"{path}: header missing {key!r}")
    arch = normalize_arch(header["arch"])
    plan = dict(layer_plan(arch))
    alpha_bar = np.asarray(header["alpha_bar"], dtype=np.float64)
    if alpha_bar.ndim != 1 or alpha_bar.size < 1:
        raise WeightManifestError(f"{path}: alpha_bar schedule missing or empty")
    if np.any(np.diff(alpha_bar) >= 0):
        raise WeightManifestError(f"{path}: alpha_bar must be strictly decreasing")
    if not (alpha_bar[0] < 1.0 and alpha_bar[-1] > 0.0):
        raise WeightManifestError(f"{path}: alpha_bar must lie in (0, 1)")

    seen = {}
    for entry in header["tensors"]:
        name = entry.get("name")
        if name not in plan:
            raise WeightManifestError(f"{path}: unknown tensor {name!r}")
        if name in seen:
            raise WeightManifestError(f"{path}: duplicate tensor {name!r}")
        if entry.get("dtype") != "f32":
            raise WeightManifestError(f"{path}: {name}: unsupported dtype")
        shape = tuple(int(s) for s in entry["shape"])
        if shape != plan[name]:
            raise WeightManifestError(
                f"{path}: {name}: shape {shape} != declared {plan[name]}"
            )
        nbytes = int(entry["nbytes"])
        if nbytes != int(np.prod(shape)) * 4:
            raise WeightManifestError(f"{path}: {name}: nbytes inconsistent with shape")
        offset = int(entry["offset"])
        if offset < 0 or offset + nbytes > len(payload):
            raise WeightIOError(f"{path}: {name}: payload truncated")
        arr = np.frombuffer(payload[offset:offset + nbytes], dtype="<f4").reshape(shape)
        seen[name] = arr.copy()
    missing = set(plan) - set(seen)
    if missing:
        raise WeightManifestError(f"{path}: missing tensors: {sorted(missing)[:4]} ...")
    return arch, alpha_bar, seen
