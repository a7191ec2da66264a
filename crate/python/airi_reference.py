"""Reference forward pass for airi denoiser weight files.

Reads ``manifest.json`` and the ``weights.bin`` next to it, checks the
checksum, and applies the network to images stored as raw little-endian
float64 arrays.

    python3 airi_reference.py MANIFEST ROWS COLS INPUT OUTPUT

INPUT may hold several images back to back; OUTPUT gets one result per
image in the same layout.
"""

import hashlib
import json
import sys
from pathlib import Path

import numpy as np


def load(manifest_path):
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest["version"] != 1:
        raise ValueError(f"unsupported manifest version {manifest['version']}")
    blob = (manifest_path.parent / "weights.bin").read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != manifest["checksum-sha256"]:
        raise ValueError("weights.bin does not match the manifest checksum")
    values = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    layers = []
    pos = 0
    for spec in manifest["layers"]:
        shape = (spec["out"], spec["in"], spec["kh"], spec["kw"])
        n = int(np.prod(shape))
        kernel = values[pos:pos + n].reshape(shape)
        pos += n
        bias = values[pos:pos + spec["out"]]
        pos += spec["out"]
        layers.append((kernel, bias, spec["activation"]))
    if pos != values.size:
        raise ValueError(f"weights.bin holds {values.size} values, manifest needs {pos}")
    return manifest, layers


def conv(x, kernel, bias):
    """Zero-padded cross-correlation, stride 1, same output size."""
    out_c, in_c, kh, kw = kernel.shape
    _, rows, cols = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((in_c, rows + 2 * ph, cols + 2 * pw))
    padded[:, ph:ph + rows, pw:pw + cols] = x
    y = np.empty((out_c, rows, cols))
    y[:] = bias[:, None, None]
    for dy in range(kh):
        for dx in range(kw):
            window = padded[:, dy:dy + rows, dx:dx + cols]
            y += np.einsum("oc,chw->ohw", kernel[:, :, dy, dx], window)
    return y


def forward(manifest, layers, image):
    h = image[None, :, :]
    for kernel, bias, activation in layers:
        h = conv(h, kernel, bias)
        if activation == "relu":
            h = np.maximum(h, 0.0)
    r = h[0]
    if manifest.get("residual_skip", True):
        return np.maximum(image - r, 0.0)
    return np.maximum(r, 0.0)


def main(argv):
    if len(argv) != 6:
        print(__doc__, file=sys.stderr)
        return 2
    manifest, layers = load(argv[1])
    rows, cols = int(argv[2]), int(argv[3])
    data = np.fromfile(argv[4], dtype="<f8").reshape(-1, rows, cols)
    out = np.stack([forward(manifest, layers, img) for img in data])
    out.astype("<f8").tofile(argv[5])
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
