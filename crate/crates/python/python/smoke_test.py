"""Quick end-to-end check of the Python bindings on a tiny synthetic set."""

import math
import sys
import tempfile
from pathlib import Path

import glf


def main():
    cfg = glf.PatchConfig(curves=8, samples=10)
    assert cfg.vertex_count == 81, cfg.vertex_count

    # path graph on three vertices
    ev = glf.graph_laplacian_eigenvalues([[0, 1, 2]], 3)
    assert all(abs(a - b) < 1e-9 for a, b in zip(sorted(ev), [0.0, 3.0, 3.0])), ev

    basis = glf.shared_basis(cfg, 20)
    assert len(basis) == 20 and basis.dimension == 81
    assert abs(basis.eigenvalues[0]) < 1e-9

    mesh, marks = glf.synth_face(subject=0, aus=[12], level=2)
    assert mesh.num_vertices > 0 and len(marks) == 68
    apex = dict(marks)[marks[30][0]]
    patch = glf.build_patch(mesh, apex, cfg, label=marks[30][0])
    assert len(patch) == 81

    coeffs = glf.glf_coefficients(patch, basis, 10)
    norms = glf.glf_norms(patch, basis, 10)
    assert len(coeffs) == 10 and len(norms) == 10
    assert all(abs(n - math.sqrt(sum(c * c for c in row))) < 1e-9 for n, row in zip(norms, coeffs))
    assert len(glf.shape_dna(patch, 5)) == 5

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        scans = glf.synth_generate(tmp / "data", subjects=4, levels=1, seed=3)
        assert scans == 4 * 6, scans
        summary = glf.extract_features(tmp / "data" / "manifest.csv", tmp / "f.bin", k=20, config=cfg)
        assert summary["rows"] == scans and summary["failed_scans"] == []
        feats = glf.FeatureMatrix.load(tmp / "f.bin")
        assert len(feats) == scans and feats.k == 20

        result = glf.evaluate_expressions(feats, folds=4, seed=1)
        assert len(result["fold_accuracies"]) == 4
        assert 0.0 <= result["mean_accuracy"] <= 100.0
        aus = glf.evaluate_aus(feats, classifier="flda", folds=4)
        assert len(aus["scores"]) == 17
        sweep = glf.eigen_sweep(feats, [5, 10, 20], folds=4)
        assert [r["k"] for r in sweep["rows"]] == [5, 10, 20]

    try:
        glf.PatchConfig(lambda_min=10, lambda_max=5)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print(f"glf {glf.__version__}: smoke test ok, expression accuracy {result['mean_accuracy']:.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
