"""Cross-checks the NPY and manifest contract against numpy.

Usage: npy_crosscheck.py OWLKIT_BINARY WORKDIR
"""

import json
import pathlib
import shutil
import subprocess
import sys

import numpy as np


def run(binary, *args):
    subprocess.run([binary, *args], check=True)


def main():
    binary, work = sys.argv[1], pathlib.Path(sys.argv[2])
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)

    # Files written by the engine load in numpy with the promised dtypes.
    run(binary, "synth", "--out", str(work / "data"), "--novel", "3", "--samples", "20",
        "--base-samples", "20", "--test-samples", "10", "--seed", "5")
    manifest = json.loads((work / "data" / "manifest.json").read_text())
    assert set(manifest) >= {"dataset", "dim", "sessions"}, manifest.keys()
    for entry in manifest["sessions"]:
        assert set(entry) == {"session_index", "role", "feature_path", "label_path", "labeled"}, entry
        x = np.load(work / "data" / entry["feature_path"])
        assert x.dtype == np.dtype("<f4") and x.ndim == 2 and x.shape[1] == manifest["dim"], x.dtype
        assert np.isfinite(x).all()
        if entry["label_path"] is not None:
            y = np.load(work / "data" / entry["label_path"])
            assert y.dtype == np.dtype("<i8") and y.shape == (x.shape[0],), (y.dtype, y.shape)

    run(binary, "fit-base", "--manifest", str(work / "data" / "manifest.json"), "--out", str(work / "state"))
    state = json.loads((work / "state" / "state.json").read_text())
    assert state["version"] == "owl-state-v1", state.get("version")
    for name in ("classifier.npy", "scorer.npy"):
        arr = np.load(work / "state" / name)
        assert arr.dtype == np.dtype("<f8") and np.isfinite(arr).all(), name

    # Files written by numpy load in the engine: three separated blobs cluster perfectly.
    rng = np.random.default_rng(0)
    centers = np.eye(3, 4, dtype=np.float64) * 20.0
    labels = np.repeat(np.arange(3, dtype=np.int64), 30)
    feats = (centers[labels] + rng.normal(size=(90, 4))).astype("<f4")
    np.save(work / "feats.npy", feats)
    np.save(work / "labels.npy", labels)
    out = work / "ncd.csv"
    run(binary, "ncd-eval", "--features", str(work / "feats.npy"), "--labels", str(work / "labels.npy"),
        "--k", "3", "--out", str(out))
    header, row = out.read_text().strip().splitlines()
    assert header == "k,nmi,purity,cluster_acc", header
    assert row == "3,100.00,100.00,100.00", row

    # A label file of the wrong length is rejected with the data/I-O exit code.
    np.save(work / "short.npy", labels[:-1])
    code = subprocess.run([binary, "ncd-eval", "--features", str(work / "feats.npy"), "--labels",
                           str(work / "short.npy")], stderr=subprocess.DEVNULL).returncode
    assert code == 3, code

    # Big-endian or Fortran-ordered input is refused rather than misread.
    np.save(work / "big.npy", feats.astype(">f4"))
    np.save(work / "fortran.npy", np.asfortranarray(feats))
    for name in ("big.npy", "fortran.npy"):
        code = subprocess.run([binary, "ncd-eval", "--features", str(work / name), "--labels",
                               str(work / "labels.npy")], stderr=subprocess.DEVNULL).returncode
        assert code == 3, (name, code)
    print("npy cross-check passed")


if __name__ == "__main__":
    main()
