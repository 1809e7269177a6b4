"""
Binary model file.

Layout (little-endian):
  magic      b"MHDSC1"
  counts     uint32: V, P_1..P_V, P_c, N_d, N, l, n_alpha
  payload    float64, row-major: D^1..D^V, D^label, W (N_d × N), α
  metadata   uint32 byte length, then UTF-8 ``key=value`` lines (hyperparameters)
"""
import logging
from dataclasses import fields
from typing import Dict, List, Optional

import numpy as np

from pipeline.errors import ModelFormatError, UnsupportedVersionError
from pipeline.solver import Hyperparams, ModelState
from utils.matrix_io import ensure_parent_dir

logger = logging.getLogger(__name__)

MAGIC_PREFIX = b"MHDSC"
FORMAT_VERSION = 1
MAGIC = MAGIC_PREFIX + str(FORMAT_VERSION).encode("ascii")

_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def _hyperparams_text(hp: Optional[Hyperparams]) -> bytes:
    if hp is None:
        return b""
    lines = []
    for f in fields(hp):
        value = getattr(hp, f.name)
        # repr 保证浮点数精确往返
        lines.append(f"{f.name}={value!r}" if isinstance(value, float) else f"{f.name}={value}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_hyperparams(text: str) -> Optional[Hyperparams]:
    if not text.strip():
        return None
    raw: Dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelFormatError(f"malformed metadata line {line!r}")
        raw[key.strip()] = value.strip()
    defaults = Hyperparams()
    kwargs = {}
    for f in fields(Hyperparams):
        if f.name not in raw:
            continue
        kind = type(getattr(defaults, f.name))
        value = raw[f.name]
        try:
            if kind is bool:
                kwargs[f.name] = value == "True"
            else:
                kwargs[f.name] = kind(value)
        except ValueError:
            raise ModelFormatError(f"metadata field {f.name} has invalid value {value!r}")
    unknown = sorted(set(raw) - {f.name for f in fields(Hyperparams)})
    if unknown:
        logger.warning(f"模型文件包含未知的超参数字段: {unknown}")
    return Hyperparams(**kwargs)


def save_model(state: ModelState, path: str) -> str:
    """写入模型文件，相同状态总是得到逐字节相同的文件"""
    counts = ([state.n_views] + [d.shape[0] for d in state.feature_dictionaries]
              + [state.label_dictionary.shape[0], state.n_atoms, state.codes.shape[1],
                 state.labelled_count, len(state.alpha)])
    meta = _hyperparams_text(state.hyperparams)
    ensure_parent_dir(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.asarray(counts, dtype=_U32).tobytes())
        for d in state.dictionaries:
            fh.write(np.ascontiguousarray(d, dtype=_F64).tobytes())
        fh.write(np.ascontiguousarray(state.codes, dtype=_F64).tobytes())
        fh.write(np.ascontiguousarray(state.alpha, dtype=_F64).tobytes())
        fh.write(np.asarray([len(meta)], dtype=_U32).tobytes())
        fh.write(meta)
    logger.info(f"模型已保存: {path}")
    return path


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.blob):
            raise ModelFormatError(f"truncated model file: needed {size} bytes at offset {self.pos}")
        chunk = self.blob[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def u32(self, count: int) -> List[int]:
        return [int(x) for x in np.frombuffer(self.take(count * _U32.itemsize), dtype=_U32)]

    def f64(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        return np.frombuffer(self.take(size * _F64.itemsize), dtype=_F64).reshape(shape).copy()


def _check_magic(head: bytes) -> None:
    if head == MAGIC:
        return
    if head[:len(MAGIC_PREFIX)] == MAGIC_PREFIX and head[len(MAGIC_PREFIX):].isdigit():
        version = int(head[len(MAGIC_PREFIX):])
        if version > FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"model format version {version} is newer than supported version {FORMAT_VERSION}")
    raise ModelFormatError(f"not a model file (bad magic {head!r})")


def load_model(path: str) -> ModelState:
    """
    读取模型文件

    Raises:
        ModelFormatError: 魔数错误、文件截断或元数据损坏
        UnsupportedVersionError: 文件版本高于当前支持的版本
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    _check_magic(reader.take(len(MAGIC)))
    n_views = reader.u32(1)[0]
    if n_views < 1:
        raise ModelFormatError(f"model declares {n_views} views")
    dims = reader.u32(n_views)
    n_classes, n_atoms, n, l, n_alpha = reader.u32(5)
    if not 1 <= l <= n:
        raise ModelFormatError(f"inconsistent counts N={n}, l={l}")
    dictionaries = [reader.f64((p, n_atoms)) for p in dims + [n_classes]]
    codes = reader.f64((n_atoms, n))
    alpha = reader.f64((n_alpha,))
    meta_len = reader.u32(1)[0]
    try:
        meta = reader.take(meta_len).decode("utf-8")
    except UnicodeDecodeError:
        raise ModelFormatError("model metadata is not valid UTF-8")
    if reader.pos != len(reader.blob):
        raise ModelFormatError(f"{len(reader.blob) - reader.pos} trailing bytes after model payload")
    return ModelState(dictionaries=dictionaries, codes=codes, alpha=alpha, labelled_count=l,
                      hyperparams=_parse_hyperparams(meta))
