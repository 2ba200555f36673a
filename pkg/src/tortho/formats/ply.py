"""Binary little-endian PLY files holding Gaussian fields.

The vanilla layout is the one written by common splatting trainers:
``x y z f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3``, with
``f_rest`` stored channel-major (all 15 coefficients of red first). FAGK
banks add ``f_alpha_rest_0..14``, ``f_scale_rest_0..44`` (axis-major) and
``f_rot_rest_0..59`` (component-major). Unknown extra properties such as
normals are ignored on read.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, TruncatedDataError
from ..field import N_REST, GaussianField

PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

MANDATORY = (
    ["x", "y", "z"]
    + [f"f_dc_{i}" for i in range(3)]
    + [f"f_rest_{i}" for i in range(45)]
    + ["opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)
FAGK_ATTRS = (
    [f"f_alpha_rest_{i}" for i in range(N_REST)]
    + [f"f_scale_rest_{i}" for i in range(3 * N_REST)]
    + [f"f_rot_rest_{i}" for i in range(4 * N_REST)]
)


@dataclass
class FieldFileHeader:
    count: int
    properties: list  # (name, ply type)
    fagk_present: bool
    header_bytes: int = 0

    @property
    def names(self):
        return [p[0] for p in self.properties]


def read_header(fh) -> FieldFileHeader:
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise FormatError("not a PLY file")
    count = None
    props = []
    in_vertex = False
    fmt = None
    nbytes = len(magic)
    while True:
        raw = fh.readline()
        if not raw.endswith(b"\n"):
            raise TruncatedDataError("PLY header ended before end_header")
        nbytes += len(raw)
        line = raw.decode("ascii", errors="replace").strip()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1] if len(parts) > 1 else ""
        elif parts[0] == "element":
            if len(parts) != 3:
                raise FormatError(f"bad element line: {line!r}")
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
            elif int(parts[2]) != 0:
                raise FormatError(f"unsupported non-empty element {parts[1]!r}")
        elif parts[0] == "property":
            if parts[1] == "list":
                raise FormatError("list properties are not supported")
            if len(parts) != 3 or parts[1] not in PLY_TYPES:
                raise FormatError(f"bad property line: {line!r}")
            if in_vertex:
                props.append((parts[2], parts[1]))
        else:
            raise FormatError(f"unexpected header line: {line!r}")
    if fmt != "binary_little_endian":
        raise FormatError(f"only binary_little_endian PLY is supported (got {fmt!r})")
    if count is None:
        raise FormatError("PLY has no vertex element")
    names = {p[0] for p in props}
    for attr in MANDATORY:
        if attr not in names:
            raise FormatError(f"missing mandatory attribute {attr!r}")
    fagk = [a in names for a in FAGK_ATTRS]
    if any(fagk) and not all(fagk):
        missing = next(a for a, ok in zip(FAGK_ATTRS, fagk) if not ok)
        raise FormatError(f"incomplete FAGK attributes, missing {missing!r}")
    return FieldFileHeader(count, props, all(fagk), nbytes)


def read_field(path) -> GaussianField:
    with open(path, "rb") as fh:
        header = read_header(fh)
        dtype = np.dtype([(n, "<" + PLY_TYPES[t]) for n, t in header.properties])
        need = dtype.itemsize * header.count
        payload = fh.read(need)
    if len(payload) < need:
        raise TruncatedDataError(f"{path}: expected {need} payload bytes, found {len(payload)}")
    v = np.frombuffer(payload, dtype=dtype, count=header.count)

    def cols(names):
        return np.stack([v[n] for n in names], axis=1)

    n = header.count
    dc = cols([f"f_dc_{i}" for i in range(3)])
    rest = cols([f"f_rest_{i}" for i in range(45)]).reshape(n, 3, N_REST).transpose(0, 2, 1)
    kw = dict(
        positions=cols(["x", "y", "z"]),
        rotations=cols([f"rot_{i}" for i in range(4)]),
        log_scales=cols([f"scale_{i}" for i in range(3)]),
        opacity_logits=v["opacity"].copy(),
        color_sh=np.concatenate([dc[:, None, :], rest], axis=1),
    )
    if header.fagk_present:
        kw["fagk_opacity_sh"] = cols([f"f_alpha_rest_{i}" for i in range(N_REST)])
        kw["fagk_scale_sh"] = (
            cols([f"f_scale_rest_{i}" for i in range(3 * N_REST)]).reshape(n, 3, N_REST).transpose(0, 2, 1)
        )
        kw["fagk_rotation_sh"] = (
            cols([f"f_rot_rest_{i}" for i in range(4 * N_REST)]).reshape(n, 4, N_REST).transpose(0, 2, 1)
        )
    return GaussianField(**kw)


def _ply_type(a):
    return "double" if np.asarray(a).dtype == np.float64 else "float"


def write_field(field: GaussianField, path) -> None:
    n = field.count
    csh = np.asarray(field.color_sh)
    if csh.shape[1] < 16:
        csh = np.pad(csh, ((0, 0), (0, 16 - csh.shape[1]), (0, 0)))
    columns = []  # (name, array)
    for i, name in enumerate("xyz"):
        columns.append((name, field.positions[:, i]))
    for c in range(3):
        columns.append((f"f_dc_{c}", csh[:, 0, c]))
    for c in range(3):
        for i in range(N_REST):
            columns.append((f"f_rest_{c * N_REST + i}", csh[:, 1 + i, c]))
    columns.append(("opacity", field.opacity_logits))
    for i in range(3):
        columns.append((f"scale_{i}", field.log_scales[:, i]))
    for i in range(4):
        columns.append((f"rot_{i}", field.rotations[:, i]))
    if field.fagk_enabled:
        for i in range(N_REST):
            columns.append((f"f_alpha_rest_{i}", field.fagk_opacity_sh[:, i]))
        for a in range(3):
            for i in range(N_REST):
                columns.append((f"f_scale_rest_{a * N_REST + i}", field.fagk_scale_sh[:, i, a]))
        for c in range(4):
            for i in range(N_REST):
                columns.append((f"f_rot_rest_{c * N_REST + i}", field.fagk_rotation_sh[:, i, c]))

    types = [(name, _ply_type(arr)) for name, arr in columns]
    dtype = np.dtype([(name, "<" + PLY_TYPES[t]) for name, t in types])
    rec = np.empty(n, dtype=dtype)
    for name, arr in columns:
        rec[name] = arr
    lines = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    lines += [f"property {t} {name}" for name, t in types]
    lines.append("end_header")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(rec.tobytes())
    os.replace(tmp, path)
