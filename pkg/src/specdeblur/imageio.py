"""Image and PSF file formats: PGM (P2/P5, 8- or 16-bit) and flat CSV.

PGM pixels are maxval-scaled to [0, 1] on read; writing clamps to [0, 1]
(the only place in the library where clamping happens). The CSV layout is
row-major with a leading "m,n" header line; PSF CSVs use the same layout.
"""

import numpy as np

from .imagegrid import Psf


def read_pgm(path):
    """Read a P2 or P5 PGM. Returns (image in [0,1], meta dict).

    meta carries {"format": "P2"|"P5", "maxval": int} so a write can
    round-trip bit-identically.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments allowed
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic = tokens[0].decode()
    if magic not in ("P2", "P5"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not 0 < maxval < 65536:
        raise ValueError(f"bad maxval {maxval}")
    if magic == "P2":
        values = np.array(data[pos:].split(), dtype=int)
        if values.size != width * height:
            raise ValueError("pixel count does not match header")
        raw = values.reshape((height, width))
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        count = width * height
        raw = np.frombuffer(data[pos : pos + count * dtype.itemsize], dtype=dtype)
        if raw.size != count:
            raise ValueError("pixel data truncated")
        raw = raw.reshape((height, width)).astype(int)
    img = raw.astype(float) / maxval
    return img, {"format": magic, "maxval": maxval}


def write_pgm(path, img, binary=True, maxval=255):
    """Write a single-channel image as PGM, clamping to [0, 1] first."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM supports single-channel images only")
    if not 0 < maxval < 65536:
        raise ValueError(f"bad maxval {maxval}")
    quant = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(int)
    m, n = img.shape
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{n} {m}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = np.dtype(">u2") if maxval > 255 else np.uint8
            fh.write(quant.astype(dtype).tobytes())
        else:
            lines = [" ".join(str(v) for v in row) for row in quant]
            fh.write(("\n".join(lines) + "\n").encode())


def read_image(path):
    """Dispatch on extension: .pgm or .csv. Returns (image, meta)."""
    p = str(path)
    if p.lower().endswith(".pgm"):
        return read_pgm(p)
    if p.lower().endswith(".csv"):
        return read_image_csv(p), {"format": "csv", "maxval": None}
    raise ValueError(f"unsupported image format: {p}")


def write_image(path, img, meta=None):
    """Write an image, preserving the source PGM format/maxval when given."""
    p = str(path)
    if p.lower().endswith(".pgm"):
        meta = meta or {}
        write_pgm(p, img, binary=meta.get("format", "P5") == "P5", maxval=meta.get("maxval") or 255)
    elif p.lower().endswith(".csv"):
        write_image_csv(p, img)
    else:
        raise ValueError(f"unsupported image format: {p}")


def write_image_csv(path, img):
    """Row-major CSV with a leading "m,n" header line; raw (unclamped) values."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("CSV export supports single-channel images only")
    m, n = img.shape
    with open(path, "w") as fh:
        fh.write(f"{m},{n}\n")
        for row in img:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_image_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        m, n = (int(t) for t in header.split(","))
        values = [[float(t) for t in line.strip().split(",")] for line in fh if line.strip()]
    img = np.array(values, dtype=float)
    if img.shape != (m, n):
        raise ValueError(f"CSV body {img.shape} does not match header ({m},{n})")
    return img


def write_psf_csv(path, psf):
    write_image_csv(path, psf.array if isinstance(psf, Psf) else psf)


def read_psf_csv(path):
    return Psf(read_image_csv(path))
