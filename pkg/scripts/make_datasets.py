"""Regenerate the bundled dataset CSVs from scikit-learn's copies.

Run once; the generated files are committed so loading is byte-stable and
the library itself never depends on scikit-learn.
"""

from pathlib import Path

import numpy as np
from sklearn.datasets import load_breast_cancer, load_digits, load_iris, load_wine

OUT = Path(__file__).resolve().parent.parent / "src" / "projwb" / "data"

IRIS_FEATURES = ["sepal_length", "sepal_width", "petal_length", "petal_width"]


def sanitize(name: str) -> str:
    return name.strip().replace(" ", "_")


def write_csv(path: Path, features: np.ndarray, labels: np.ndarray, names: list[str]) -> None:
    lines = [",".join(names + ["label"])]
    for row, lab in zip(features, labels):
        cells = [repr(float(v)) for v in row]
        cells.append(str(int(lab)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{path.name}: n={len(labels)} d={features.shape[1]} classes={len(set(labels.tolist()))}")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)

    iris = load_iris()
    write_csv(OUT / "iris.csv", iris.data, iris.target, IRIS_FEATURES)

    wine = load_wine()
    write_csv(OUT / "wine.csv", wine.data, wine.target, [sanitize(n) for n in wine.feature_names])

    digits = load_digits()
    names = [f"pixel_{i}" for i in range(digits.data.shape[1])]
    write_csv(OUT / "digits.csv", digits.data, digits.target, names)

    bc = load_breast_cancer()
    write_csv(OUT / "breast_cancer.csv", bc.data, bc.target, [sanitize(n) for n in bc.feature_names])


if __name__ == "__main__":
    main()
