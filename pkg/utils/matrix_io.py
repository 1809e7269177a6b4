"""
Plain-text matrix formats.

- ``MAT v1 kind=<kind> rows=<r> cols=<c>``: one matrix row per line.
- ``SYMN v1 N=<n>``: lower triangle of a symmetric matrix, row i holds i+1 values.
- ``<MAGIC> v1 blocks=<n>``: several MAT blocks in one file (ground truth bundles).

Numbers are written with ``%.17g`` so files round-trip exactly and identical
inputs always give byte-identical files.
"""
import os
import re
from typing import Dict, List, Sequence, TextIO, Tuple

import numpy as np

from pipeline.errors import DatasetFormatError

NUMBER_FORMAT = "%.17g"

_HEADER_FIELD = re.compile(r"^([A-Za-z_]+)=(\S+)$")


def ensure_dir(path: str) -> None:
    if path and not os.path.exists(path):
        os.makedirs(path, exist_ok=True)


def ensure_parent_dir(path: str) -> None:
    ensure_dir(os.path.dirname(os.path.abspath(path)))


def format_row(values) -> str:
    return " ".join(NUMBER_FORMAT % float(x) for x in values)


def parse_header(line: str, magic: str, line_no: int = 1) -> Dict[str, str]:
    """解析 ``<MAGIC> v1 key=value ...`` 形式的表头"""
    parts = line.split()
    if len(parts) < 2 or parts[0] != magic:
        raise DatasetFormatError(f"expected '{magic}' header", line_no, 1)
    if parts[1] != "v1":
        raise DatasetFormatError(f"unsupported {magic} version '{parts[1]}'", line_no, 2)
    fields: Dict[str, str] = {}
    for col, token in enumerate(parts[2:], start=3):
        m = _HEADER_FIELD.match(token)
        if not m:
            raise DatasetFormatError(f"malformed header field '{token}'", line_no, col)
        fields[m.group(1)] = m.group(2)
    return fields


def header_int(fields: Dict[str, str], key: str, line_no: int = 1) -> int:
    if key not in fields:
        raise DatasetFormatError(f"header is missing '{key}'", line_no)
    try:
        return int(fields[key])
    except ValueError:
        raise DatasetFormatError(f"header field '{key}' is not an integer: {fields[key]!r}", line_no)


def parse_row(line: str, expected: int, line_no: int) -> np.ndarray:
    """解析一行数值，检查列数与有限性"""
    tokens = line.split()
    if len(tokens) != expected:
        raise DatasetFormatError(
            f"dimension mismatch: expected {expected} values, found {len(tokens)}", line_no)
    row = np.empty(expected, dtype=float)
    for col, tok in enumerate(tokens, start=1):
        try:
            row[col - 1] = float(tok)
        except ValueError:
            raise DatasetFormatError(f"not a number: {tok!r}", line_no, col)
        if not np.isfinite(row[col - 1]):
            raise DatasetFormatError(f"non-finite value {tok!r}", line_no, col)
    return row


def read_data_lines(fh: TextIO) -> List[Tuple[int, str]]:
    """读取非空行，返回 (行号, 内容) 列表"""
    return [(i, line.strip()) for i, line in enumerate(fh, start=1) if line.strip()]


def format_matrix_block(kind: str, matrix: np.ndarray) -> str:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"MAT v1 kind={kind} rows={matrix.shape[0]} cols={matrix.shape[1]}"]
    lines.extend(format_row(row) for row in matrix)
    return "\n".join(lines) + "\n"


def write_matrix(path: str, kind: str, matrix: np.ndarray) -> str:
    ensure_parent_dir(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_matrix_block(kind, matrix))
    return path


def _parse_matrix_block(lines: List[Tuple[int, str]], start: int) -> Tuple[str, np.ndarray, int]:
    """从 lines[start] 的 MAT 表头开始解析一个矩阵块，返回 (kind, 矩阵, 下一块的位置)"""
    line_no, head = lines[start]
    fields = parse_header(head, "MAT", line_no)
    rows = header_int(fields, "rows", line_no)
    cols = header_int(fields, "cols", line_no)
    body = lines[start + 1:start + 1 + rows]
    if len(body) != rows:
        last = body[-1][0] if body else line_no
        raise DatasetFormatError(f"dimension mismatch: expected {rows} rows, found {len(body)}", last)
    out = np.empty((rows, cols), dtype=float)
    for i, (n, text) in enumerate(body):
        out[i] = parse_row(text, cols, n)
    return fields.get("kind", ""), out, start + 1 + rows


def read_matrix(path: str, kind: str = None) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = read_data_lines(fh)
    if not lines:
        raise DatasetFormatError("empty matrix file", 1)
    found, out, end = _parse_matrix_block(lines, 0)
    if kind is not None and found != kind:
        raise DatasetFormatError(f"expected matrix kind '{kind}', found '{found}'", lines[0][0])
    if end != len(lines):
        raise DatasetFormatError("dimension mismatch: extra rows after the matrix", lines[end][0])
    return out


def write_matrix_bundle(path: str, magic: str, blocks: Sequence[Tuple[str, np.ndarray]]) -> str:
    """多个 MAT 块写入同一个文件，首行为 ``<magic> v1 blocks=<n>``"""
    ensure_parent_dir(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{magic} v1 blocks={len(blocks)}\n")
        for kind, matrix in blocks:
            fh.write(format_matrix_block(kind, matrix))
    return path


def read_matrix_bundle(path: str, magic: str) -> Dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = read_data_lines(fh)
    if not lines:
        raise DatasetFormatError(f"empty {magic} file", 1)
    count = header_int(parse_header(lines[0][1], magic, lines[0][0]), "blocks", lines[0][0])
    out: Dict[str, np.ndarray] = {}
    pos = 1
    for _ in range(count):
        if pos >= len(lines):
            raise DatasetFormatError(f"expected {count} matrix blocks, found {len(out)}", lines[-1][0])
        kind, matrix, pos = _parse_matrix_block(lines, pos)
        out[kind] = matrix
    return out


def write_symmetric(path: str, matrix: np.ndarray) -> str:
    """以下三角形式导出对称矩阵（测试对照用）"""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    ensure_parent_dir(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"SYMN v1 N={n}\n")
        for i in range(n):
            fh.write(format_row(matrix[i, :i + 1]) + "\n")
    return path


def read_symmetric(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = read_data_lines(fh)
    if not lines:
        raise DatasetFormatError("empty matrix file", 1)
    line_no, head = lines[0]
    n = header_int(parse_header(head, "SYMN", line_no), "N", line_no)
    body = lines[1:]
    if len(body) != n:
        raise DatasetFormatError(f"expected {n} rows, found {len(body)}", line_no)
    out = np.zeros((n, n), dtype=float)
    for i, (ln, text) in enumerate(body):
        out[i, :i + 1] = parse_row(text, i + 1, ln)
    return out + np.tril(out, -1).T
