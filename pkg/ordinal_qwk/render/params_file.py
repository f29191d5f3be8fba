"""
Двоичный контейнер параметров сети (little-endian).

    magic      4 байта  b"ORDQ"
    version    u16      1
    head_len   u8       длина токена головы
    head       ASCII    токен головы (например "fix-a")
    n_layers   u32
    на слой:   u32 fan_in, u32 fan_out, u8 код активации
    has_anchor u8, anchor_len u32
    данные     float64: для каждого слоя веса (row-major), затем смещение; затем a
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from ordinal_qwk.errors import ParseError
from ordinal_qwk.models import Layer, NetworkParams

MAGIC = b"ORDQ"
VERSION = 1
ACTIVATION_CODES = {"identity": 0, "relu": 1, "softmax": 2, "sigmoid": 3}
_CODE_TO_ACTIVATION = {v: k for k, v in ACTIVATION_CODES.items()}


def params_to_bytes(params: NetworkParams) -> bytes:
    head = params.head.encode("ascii")
    parts = [MAGIC, struct.pack("<HB", VERSION, len(head)), head, struct.pack("<I", len(params.layers))]
    for layer in params.layers:
        parts.append(struct.pack("<IIB", layer.fan_in, layer.fan_out, ACTIVATION_CODES[layer.activation]))
    anchor_len = 0 if params.anchor is None else int(params.anchor.size)
    parts.append(struct.pack("<BI", int(params.anchor is not None), anchor_len))
    parts.append(params.flatten().astype("<f8").tobytes())
    return b"".join(parts)


def params_from_bytes(blob: bytes, source: str = "<bytes>") -> NetworkParams:
    try:
        if blob[:4] != MAGIC:
            raise ParseError(f"{source}: неверная сигнатура {blob[:4]!r}, ожидалось {MAGIC!r}")
        pos = 4
        version, head_len = struct.unpack_from("<HB", blob, pos)
        pos += 3
        if version != VERSION:
            raise ParseError(f"{source}: версия контейнера {version} не поддерживается")
        head = blob[pos:pos + head_len].decode("ascii")
        pos += head_len
        (n_layers,) = struct.unpack_from("<I", blob, pos)
        pos += 4

        dims = []
        for _ in range(n_layers):
            fan_in, fan_out, code = struct.unpack_from("<IIB", blob, pos)
            pos += 9
            if code not in _CODE_TO_ACTIVATION:
                raise ParseError(f"{source}: неизвестный код активации {code}")
            dims.append((fan_in, fan_out, _CODE_TO_ACTIVATION[code]))
        has_anchor, anchor_len = struct.unpack_from("<BI", blob, pos)
        pos += 5
    except struct.error as e:
        raise ParseError(f"{source}: файл параметров обрезан ({e})") from e

    total = sum(fi * fo + fo for fi, fo, _ in dims) + (anchor_len if has_anchor else 0)
    if len(blob) - pos != 8 * total:
        raise ParseError(f"{source}: ожидалось {total} чисел float64, найдено {(len(blob) - pos) / 8:g}")
    data = np.frombuffer(blob, dtype="<f8", offset=pos)
    data = data.astype(np.float64)

    layers, cur = [], 0
    for fan_in, fan_out, act in dims:
        w = data[cur:cur + fan_in * fan_out].reshape(fan_in, fan_out).copy()
        cur += fan_in * fan_out
        b = data[cur:cur + fan_out].copy()
        cur += fan_out
        layers.append(Layer(weight=w, bias=b, activation=act))
    anchor = data[cur:cur + anchor_len].copy() if has_anchor else None
    return NetworkParams(layers=layers, anchor=anchor, head=head)


def save_params(params: NetworkParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(params_to_bytes(params))
    return path


def load_params(path: Union[str, Path]) -> NetworkParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Не найден файл параметров: {path}")
    return params_from_bytes(path.read_bytes(), str(path))
