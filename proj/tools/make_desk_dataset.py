#!/usr/bin/env python3
"""Build the bundled desk-scale digits dataset (IDX format).

Source: the UCI Optical Recognition of Handwritten Digits set as shipped by
scikit-learn (1797 images, 8x8, intensities 0..16). Each image is upscaled
bilinearly to 28x28 and rescaled to 0..255 so it is drop-in compatible with
MNIST-shaped models. The split is stratified: 50 test images per class
(500 total), the remaining 1297 train. Fully deterministic (fixed RNG seed),
so rerunning this script reproduces the committed files byte for byte.

Usage: python3 tools/make_desk_dataset.py [out_dir]   (default: data/digits)
"""

import struct
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

SEED = 7
TEST_PER_CLASS = 50
SCALE = 28 / 8  # 3.5


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/digits")
    out_dir.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    small = digits.images.astype(np.float64)  # (1797, 8, 8), values 0..16
    labels = digits.target.astype(np.uint8)

    big = np.empty((small.shape[0], 28, 28), dtype=np.uint8)
    for i, img in enumerate(small):
        up = zoom(img, SCALE, order=1) * (255.0 / 16.0)
        big[i] = np.clip(np.rint(up), 0, 255).astype(np.uint8)

    rng = np.random.default_rng(SEED)
    test_idx = []
    for cls in range(10):
        members = np.flatnonzero(labels == cls)
        pick = rng.permutation(members)[:TEST_PER_CLASS]
        test_idx.append(pick)
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.zeros(labels.shape[0], dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)

    write_idx_images(out_dir / "train-images-idx3-ubyte", big[train_idx])
    write_idx_labels(out_dir / "train-labels-idx1-ubyte", labels[train_idx])
    write_idx_images(out_dir / "t10k-images-idx3-ubyte", big[test_idx])
    write_idx_labels(out_dir / "t10k-labels-idx1-ubyte", labels[test_idx])

    print(f"train: {train_idx.size} images, test: {test_idx.size} images")
    for cls in range(10):
        n_tr = int((labels[train_idx] == cls).sum())
        n_te = int((labels[test_idx] == cls).sum())
        print(f"  class {cls}: train {n_tr:4d}  test {n_te:3d}")


if __name__ == "__main__":
    main()
