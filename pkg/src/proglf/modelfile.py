"""Progressive model container: the byte prefix through chunk k decodes
to the LOD-k model exactly.

File layout (all integers little-endian):

    bytes 0..3    magic "PLFN"
    bytes 4..7    format version (u32), currently 1
    bytes 8..11   header JSON length (u32)
    ...           header JSON (utf-8)
    ...           chunk 1 payload, chunk 2 payload, ...

The header JSON holds the architecture, the ray-encoding config, a chunk
table (payload-relative offset, size, crc32 per chunk), and optionally an
occupancy-network blob (base64 of its raw float32 parameters).

Chunk k holds the parameters inside the LOD-k slice but outside the
LOD-(k-1) slice, as 32-bit little-endian floats, in this order (with
wp = w_{k-1}, or 0 for chunk 1, and w = w_k):

    input layer:   rows [wp, w) x all input columns, row-major; bias [wp, w)
    hidden layers, in depth order, each:
                   rows [wp, w) x columns [0, wp), row-major   (new rows)
                   rows [0, w) x columns [wp, w), row-major    (new columns)
                   bias [wp, w)
    output layer:  all rows x columns [wp, w), row-major
    chunk 1 only:  output bias (output_dim floats)
"""

from __future__ import annotations

import base64
import json
import struct
import zlib

import numpy as np

from .geometry import EncodingConfig
from .network import ArchSpec, ProgressiveMLP, param_count

MAGIC = b"PLFN"
VERSION = 1


class ModelFileError(ValueError):
    pass


class VersionError(ModelFileError):
    pass


class TruncatedError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


def _chunk_arrays(net: ProgressiveMLP, k: int):
    """The parameter blocks serialized for chunk k, in order."""
    arch = net.arch
    w = arch.width(k)
    wp = arch.width(k - 1) if k > 1 else 0
    n = arch.num_weight_layers
    blocks = [net.weights[0][wp:w, :], net.biases[0][wp:w]]
    for i in range(1, n - 1):
        if wp > 0:
            blocks.append(net.weights[i][wp:w, :wp])
        blocks.append(net.weights[i][:w, wp:w])
        blocks.append(net.biases[i][wp:w])
    blocks.append(net.weights[n - 1][:, wp:w])
    if k == 1:
        blocks.append(net.biases[n - 1])
    return blocks


def chunk_bytes(net: ProgressiveMLP, k: int) -> bytes:
    parts = [np.ascontiguousarray(b, dtype="<f4").tobytes() for b in _chunk_arrays(net, k)]
    return b"".join(parts)


def _occupancy_blob(occ: ProgressiveMLP) -> dict:
    raw = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for a in occ.weights + occ.biases
    )
    return {"arch": occ.arch.to_dict(), "data": base64.b64encode(raw).decode("ascii")}


def _occupancy_from_blob(blob: dict) -> ProgressiveMLP:
    arch = ArchSpec.from_dict(blob["arch"])
    raw = base64.b64decode(blob["data"])
    fw = arch.full_width
    shapes = (
        [(fw, arch.input_dim)]
        + [(fw, fw)] * arch.num_hidden
        + [(arch.output_dim, fw)]
    )
    off = 0
    arrays_w = []
    for rows, cols in shapes:
        n = rows * cols * 4
        arrays_w.append(np.frombuffer(raw[off : off + n], dtype="<f4").reshape(rows, cols).copy())
        off += n
    arrays_b = []
    for rows, _ in shapes:
        n = rows * 4
        arrays_b.append(np.frombuffer(raw[off : off + n], dtype="<f4").copy())
        off += n
    return ProgressiveMLP(arch=arch, weights=arrays_w, biases=arrays_b)


def pack(
    net: ProgressiveMLP,
    occupancy: ProgressiveMLP | None = None,
    encoding: EncodingConfig | None = None,
) -> bytes:
    net.check_finite()
    encoding = encoding or EncodingConfig()
    chunks = [chunk_bytes(net, k) for k in range(1, net.arch.num_lods + 1)]
    table = []
    offset = 0
    for k, payload in enumerate(chunks, start=1):
        assert len(payload) == 4 * (
            param_count(net.arch, k) - (param_count(net.arch, k - 1) if k > 1 else 0)
        )
        table.append(
            {"k": k, "offset": offset, "size": len(payload), "crc32": zlib.crc32(payload)}
        )
        offset += len(payload)
    header = {
        "arch": net.arch.to_dict(),
        "encoding": {
            "num_frequencies": encoding.num_frequencies,
            "include_raw": encoding.include_raw,
        },
        "chunks": table,
        "occupancy": _occupancy_blob(occupancy) if occupancy is not None else None,
    }
    hbytes = json.dumps(header).encode("utf-8")
    return MAGIC + struct.pack("<II", VERSION, len(hbytes)) + hbytes + b"".join(chunks)


def parse_header(data: bytes) -> tuple[dict, int]:
    """Returns (header dict, payload start offset)."""
    if len(data) < 12 or data[:4] != MAGIC:
        raise ModelFileError("not a PLFN model file")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise VersionError(f"unsupported format version {version}")
    if len(data) < 12 + hlen:
        raise TruncatedError("truncated header")
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    return header, 12 + hlen


def _empty_net(arch: ArchSpec) -> ProgressiveMLP:
    fw = arch.full_width
    shapes = (
        [(fw, arch.input_dim)]
        + [(fw, fw)] * arch.num_hidden
        + [(arch.output_dim, fw)]
    )
    return ProgressiveMLP(
        arch=arch,
        weights=[np.zeros(s, dtype=np.float32) for s in shapes],
        biases=[np.zeros(s[0], dtype=np.float32) for s in shapes],
    )


def load_prefix(data: bytes, upto_k: int) -> ProgressiveMLP:
    """Decode chunks 1..upto_k into a standalone net at width w_k."""
    header, payload_start = parse_header(data)
    arch = ArchSpec.from_dict(header["arch"])
    if not 1 <= upto_k <= arch.num_lods:
        raise ModelFileError(f"prefix LOD {upto_k} out of range")
    sub_arch = ArchSpec(
        input_dim=arch.input_dim,
        output_dim=arch.output_dim,
        num_weight_layers=arch.num_weight_layers,
        lod_widths=arch.lod_widths[:upto_k],
    )
    net = _empty_net(sub_arch)
    n = arch.num_weight_layers
    for entry in header["chunks"][:upto_k]:
        k = entry["k"]
        start = payload_start + entry["offset"]
        end = start + entry["size"]
        if end > len(data):
            raise TruncatedError(f"chunk {k} is truncated")
        payload = data[start:end]
        if zlib.crc32(payload) != entry["crc32"]:
            raise ChecksumError(f"chunk {k} checksum mismatch")
        w = arch.width(k)
        wp = arch.width(k - 1) if k > 1 else 0
        vals = np.frombuffer(payload, dtype="<f4")
        off = 0

        def take(shape):
            nonlocal off
            count = int(np.prod(shape))
            block = vals[off : off + count].reshape(shape)
            off += count
            return block

        net.weights[0][wp:w, :] = take((w - wp, arch.input_dim))
        net.biases[0][wp:w] = take((w - wp,))
        for i in range(1, n - 1):
            if wp > 0:
                net.weights[i][wp:w, :wp] = take((w - wp, wp))
            net.weights[i][:w, wp:w] = take((w, w - wp))
            net.biases[i][wp:w] = take((w - wp,))
        net.weights[n - 1][:, wp:w] = take((arch.output_dim, w - wp))
        if k == 1:
            net.biases[n - 1][:] = take((arch.output_dim,))
        if off != len(vals):
            raise ModelFileError(f"chunk {k} has trailing data")
    return net


def load_occupancy(data: bytes) -> ProgressiveMLP | None:
    header, _ = parse_header(data)
    blob = header.get("occupancy")
    return _occupancy_from_blob(blob) if blob else None


def load_encoding(data: bytes) -> EncodingConfig:
    header, _ = parse_header(data)
    enc = header.get("encoding", {})
    return EncodingConfig(
        num_frequencies=int(enc.get("num_frequencies", 2)),
        include_raw=bool(enc.get("include_raw", False)),
    )
