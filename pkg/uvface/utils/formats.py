"""File formats: OBJ meshes, PNG images, model containers and text files.

Model container layout (all integers and floats little-endian)::

    magic    8 bytes   b"UVF3DMM\\0"
    version  u32       1
    then any number of sections:
        tag      4 bytes ASCII
        length   u64     payload size in bytes
        payload

    DIMS  6 x u32      Q, T, U, V, l_S, l_A
    TRIS  T x 3 i32    triangle vertex indices
    UVCO  Q x 2 f64    per-vertex (u, v)
    LMKS  68 i32       landmark vertex indices
    EYES  2 i32        outer eye-corner vertex indices
    UNWR  4 f64        alpha1, beta1, alpha2, beta2
    SMEA  3Q f64       shape mean
    SBAS  3Q x l_S f64 shape bases, row-major
    AMEA  3Q f64       albedo mean (per-vertex RGB)
    ABAS  3Q x l_A f64 albedo bases, row-major

Fragment dump layout::

    magic b"UVFRAG\\0\\0", u32 height, u32 width,
    tri_id as H*W i32 row-major, bary as H*W*3 f32 row-major
"""

import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from ..errors import (
    BadMagicError,
    ConsistencyError,
    FormatError,
    ModelFileError,
    TruncatedSectionError,
    UnsupportedFeatureError,
    VersionMismatchError,
)
from ..models.camera import ProjectionParams
from ..models.fitting import FitResult, ParamFile
from ..models.lighting import SHLighting
from ..models.losses import LandmarkSet
from ..models.mesh import NUM_LANDMARKS, Topology, UnwrapConstants, VertexShape
from ..models.morphable import LinearModel, MorphableModel
from ..models.render import FragmentBuffer

PathLike = Union[str, Path]

MODEL_MAGIC = b"UVF3DMM\0"
MODEL_VERSION = 1
FRAGMENT_MAGIC = b"UVFRAG\0\0"
REQUIRED_SECTIONS = (
    "DIMS",
    "TRIS",
    "UVCO",
    "LMKS",
    "EYES",
    "UNWR",
    "SMEA",
    "SBAS",
    "AMEA",
    "ABAS",
)


def atomic_write(path: PathLike, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over path."""
    target = Path(path)
    directory = target.parent
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


# OBJ


def _obj_index(token: str, count: int, line: int) -> int:
    head = token.split("/")[0]
    try:
        index = int(head)
    except ValueError:
        raise FormatError(f"bad face index '{token}'", line) from None
    if index == 0:
        raise FormatError("face indices are 1-based, got 0", line)
    return index - 1 if index > 0 else count + index


def load_obj(path: PathLike) -> Tuple[VertexShape, np.ndarray, Optional[np.ndarray]]:
    """
    Parse a triangle-only OBJ file.

    Returns:
        (vertex shape, (T, 3) zero-based triangles, (N, 2) texture coords or None)
    """
    vertices: List[List[float]] = []
    texcoords: List[List[float]] = []
    faces: List[List[int]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            keyword, args = parts[0], parts[1:]
            if keyword == "v":
                if len(args) < 3:
                    raise FormatError("vertex needs three coordinates", number)
                try:
                    vertices.append([float(a) for a in args[:3]])
                except ValueError:
                    raise FormatError(f"bad vertex '{raw.strip()}'", number) from None
            elif keyword == "vt":
                try:
                    texcoords.append([float(a) for a in args[:2]])
                except ValueError:
                    message = f"bad texture coordinate '{raw.strip()}'"
                    raise FormatError(message, number) from None
            elif keyword == "f":
                if len(args) != 3:
                    if len(args) > 3:
                        raise UnsupportedFeatureError(
                            f"only triangles are supported, got {len(args)} corners",
                            number,
                        )
                    raise FormatError("face needs three corners", number)
                faces.append([_obj_index(a, len(vertices), number) for a in args])
            # normals, groups and materials are ignored

    if not vertices:
        raise FormatError("file has no vertices")
    triangles = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise FormatError("face index out of range")
    uv = np.array(texcoords, dtype=np.float64) if texcoords else None
    return VertexShape(positions=np.array(vertices)), triangles, uv


def save_obj(
    path: PathLike,
    shape: VertexShape,
    triangles: np.ndarray,
    uv: Optional[np.ndarray] = None,
) -> None:
    """Write vertices at full double precision and 1-based triangles."""
    lines = ["# uvface mesh"]
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in shape.positions]
    if uv is not None:
        lines += [f"vt {u:.17g} {v:.17g}" for u, v in np.asarray(uv)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(triangles)]
    atomic_write_text(path, "\n".join(lines) + "\n")


# PNG


def load_png(path: PathLike) -> np.ndarray:
    """Read an 8-bit image as (H, W, 3) floats in [0, 1]."""
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantise to 8 bits."""
    clipped = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    return np.round(clipped * 255.0).astype(np.uint8)


def save_png(path: PathLike, rgb: np.ndarray) -> None:
    buffer = io.BytesIO()
    Image.fromarray(to_uint8(rgb)).save(buffer, format="PNG")
    atomic_write(path, buffer.getvalue())


# model container


def _section(tag: str, payload: bytes) -> bytes:
    return tag.encode("ascii") + struct.pack("<Q", len(payload)) + payload


def save_model(path: PathLike, model: MorphableModel) -> None:
    topo = model.topology
    q, u, v, l_s, l_a = model.dims
    chunks = [
        MODEL_MAGIC,
        struct.pack("<I", MODEL_VERSION),
        _section("DIMS", struct.pack("<6I", q, topo.num_triangles, u, v, l_s, l_a)),
        _section("TRIS", topo.triangles.astype("<i4").tobytes()),
        _section("UVCO", topo.uv_coords.astype("<f8").tobytes()),
        _section("LMKS", topo.landmark_indices.astype("<i4").tobytes()),
        _section("EYES", np.asarray(topo.eye_corner_indices).astype("<i4").tobytes()),
        _section("UNWR", np.array(model.unwrap.as_tuple()).astype("<f8").tobytes()),
        _section("SMEA", model.shape_model.mean.astype("<f8").tobytes()),
        _section("SBAS", model.shape_model.bases.astype("<f8").tobytes()),
        _section("AMEA", model.albedo_model.mean.astype("<f8").tobytes()),
        _section("ABAS", model.albedo_model.bases.astype("<f8").tobytes()),
    ]
    atomic_write(path, b"".join(chunks))


def _read_sections(data: bytes) -> Dict[str, bytes]:
    if data[:8] != MODEL_MAGIC:
        raise BadMagicError(f"not a uvface model file (magic {data[:8]!r})")
    if len(data) < 12:
        raise TruncatedSectionError("file ends inside the header")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != MODEL_VERSION:
        raise VersionMismatchError(
            f"model file version {version} is not supported (expected {MODEL_VERSION})"
        )
    sections: Dict[str, bytes] = {}
    offset = 12
    while offset < len(data):
        if offset + 12 > len(data):
            raise TruncatedSectionError(f"section header cut off at byte {offset}")
        tag = data[offset : offset + 4].decode("ascii", errors="replace")
        (length,) = struct.unpack_from("<Q", data, offset + 4)
        start = offset + 12
        if start + length > len(data):
            raise TruncatedSectionError(
                f"section {tag} declares {length} bytes but only "
                f"{len(data) - start} remain"
            )
        sections[tag] = data[start : start + length]
        offset = start + length
    missing = [tag for tag in REQUIRED_SECTIONS if tag not in sections]
    if missing:
        raise ModelFileError(f"model file lacks sections {', '.join(missing)}")
    return sections


def _array(
    sections: Dict[str, bytes], tag: str, dtype: str, shape: Tuple[int, ...]
) -> np.ndarray:
    payload = sections[tag]
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise ConsistencyError(
            f"section {tag} holds {len(payload)} bytes but dims {shape} need {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(
        np.float64 if dtype.endswith("f8") else np.int64
    )


def load_model(path: PathLike) -> MorphableModel:
    """Read a model container; raises a ModelFileError subclass when invalid."""
    sections = _read_sections(Path(path).read_bytes())
    if len(sections["DIMS"]) != 24:
        raise ConsistencyError(f"DIMS holds {len(sections['DIMS'])} bytes, expected 24")
    q, t, u, v, l_s, l_a = struct.unpack("<6I", sections["DIMS"])
    try:
        topology = Topology(
            triangles=_array(sections, "TRIS", "<i4", (t, 3)),
            landmark_indices=_array(sections, "LMKS", "<i4", (NUM_LANDMARKS,)),
            uv_coords=_array(sections, "UVCO", "<f8", (q, 2)),
            num_vertices=q,
            uv_shape=(u, v),
            eye_corner_indices=tuple(_array(sections, "EYES", "<i4", (2,)).tolist()),
        )
        c = _array(sections, "UNWR", "<f8", (4,))
        unwrap = UnwrapConstants(alpha1=c[0], beta1=c[1], alpha2=c[2], beta2=c[3])
    except ValueError as exc:
        raise ConsistencyError(f"invalid topology: {exc}") from exc
    shape_model = LinearModel(
        mean=_array(sections, "SMEA", "<f8", (3 * q,)),
        bases=_array(sections, "SBAS", "<f8", (3 * q, l_s)),
    )
    albedo_model = LinearModel(
        mean=_array(sections, "AMEA", "<f8", (3 * q,)),
        bases=_array(sections, "ABAS", "<f8", (3 * q, l_a)),
    )
    return MorphableModel(
        topology=topology,
        shape_model=shape_model,
        albedo_model=albedo_model,
        unwrap=unwrap,
    )


# parameter files


def format_params(params: ParamFile) -> str:
    def row(name: str, values: np.ndarray) -> str:
        return " ".join([name, str(len(values))] + [repr(float(x)) for x in values])

    return (
        "\n".join(
            [
                "# uvface parameters: m = f pitch yaw roll tx ty; L channel-major",
                row("m", params.projection.to_vector()),
                row("L", params.light.to_vector()),
                row("f_S", np.asarray(params.f_S)),
                row("f_A", np.asarray(params.f_A)),
            ]
        )
        + "\n"
    )


def parse_params(text: str) -> ParamFile:
    values: Dict[str, List[float]] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        name = parts[0]
        if name not in ("m", "L", "f_S", "f_A"):
            raise FormatError(f"unknown parameter block '{name}'", number)
        try:
            declared = int(parts[1])
            numbers = [float(x) for x in parts[2:]]
        except (IndexError, ValueError):
            raise FormatError(f"malformed '{name}' line", number) from None
        if len(numbers) != declared:
            raise FormatError(
                f"'{name}' declares {declared} values but has {len(numbers)}", number
            )
        values[name] = numbers
    for name in ("m", "L"):
        if name not in values:
            raise FormatError(f"parameter file lacks the '{name}' block")
    try:
        return ParamFile(
            projection=ProjectionParams.from_vector(values["m"]),
            light=SHLighting.from_vector(values["L"]),
            f_S=values.get("f_S", []),
            f_A=values.get("f_A", []),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_params(path: PathLike, params: ParamFile) -> None:
    atomic_write_text(path, format_params(params))


def load_params(path: PathLike) -> ParamFile:
    return parse_params(Path(path).read_text(encoding="utf-8"))


# landmarks


def load_landmarks(path: PathLike) -> LandmarkSet:
    """68 lines of "x y [visible]"; visibility defaults to 1."""
    points: List[Tuple[float, float]] = []
    visible: List[bool] = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            if len(parts) not in (2, 3):
                raise FormatError("landmark line needs 'x y [visible]'", number)
            try:
                points.append((float(parts[0]), float(parts[1])))
                visible.append(bool(int(parts[2])) if len(parts) == 3 else True)
            except ValueError:
                raise FormatError(f"bad landmark '{raw.strip()}'", number) from None
    if len(points) != NUM_LANDMARKS:
        raise FormatError(f"expected {NUM_LANDMARKS} landmarks, found {len(points)}")
    return LandmarkSet(points=np.array(points), visible=np.array(visible))


def save_landmarks(path: PathLike, landmarks: LandmarkSet) -> None:
    lines = [
        f"{x!r} {y!r} {int(flag)}"
        for (x, y), flag in zip(landmarks.points.tolist(), landmarks.visible.tolist())
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


# fragment dump and reports


def dump_fragments(path: PathLike, fragments: FragmentBuffer) -> None:
    height, width = fragments.size
    payload = b"".join(
        [
            FRAGMENT_MAGIC,
            struct.pack("<II", height, width),
            fragments.tri_id.astype("<i4").tobytes(),
            fragments.bary.astype("<f4").tobytes(),
        ]
    )
    atomic_write(path, payload)


def load_fragments(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Read a fragment dump back as (tri_id, bary)."""
    data = Path(path).read_bytes()
    if data[:8] != FRAGMENT_MAGIC:
        raise BadMagicError("not a uvface fragment dump")
    height, width = struct.unpack_from("<II", data, 8)
    n = height * width
    expected = 16 + 4 * n + 12 * n
    if len(data) != expected:
        raise TruncatedSectionError(
            f"fragment dump has {len(data)} bytes, expected {expected}"
        )
    tri_id = np.frombuffer(data, dtype="<i4", count=n, offset=16).reshape(height, width)
    bary = np.frombuffer(data, dtype="<f4", count=3 * n, offset=16 + 4 * n)
    return tri_id.astype(np.int64), bary.reshape(height, width, 3).astype(np.float64)


def save_report(path: PathLike, result: FitResult) -> None:
    atomic_write_text(path, json.dumps(result.to_report(), indent=2) + "\n")
