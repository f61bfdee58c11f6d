"""Smoke test for the pywavblur extension module.

Build and install first, for example:

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/pywavblur-*.whl
"""

import numpy as np

import pywavblur as wb


def main():
    n = 32
    kernel = wb.KernelSpec.vertical(n)
    clean = wb.test_scene(n)
    assert clean.shape == (n, n)

    coeffs = wb.dwt(clean)
    back = wb.idwt(coeffs, clean.shape)
    assert np.allclose(back, clean, atol=1e-12)
    assert np.isclose(np.linalg.norm(coeffs), np.linalg.norm(clean))

    full = wb.Theta.build(kernel)
    blurred = kernel.apply(clean)
    assert np.allclose(full.apply(clean), blurred, atol=1e-9)
    assert full.operator_error(kernel) < 1e-9

    k20 = full.threshold(20)
    assert k20.nnz == 20 * n * n
    rows, cols, vals = k20.triplets()
    assert len(rows) == len(cols) == len(vals) == k20.nnz

    pattern = wb.Theta.from_pattern(kernel, "same all 0 0", levels=2)
    assert 1.0 < pattern.density < 10.0

    degraded = wb.add_noise(blurred, 0.02, 1)
    result = wb.restore(degraded, full, sigma=0.02)
    assert result["status"] == "converged", result["status"]
    assert result["residual"] <= result["radius"] * 1.001
    assert wb.snr_db(result["image"], clean) > wb.snr_db(degraded, clean)

    decay = wb.verify_decay(wavelet="db2")
    assert decay["slope"] <= -2.5 and decay["far_nonzero"] == 0

    try:
        wb.KernelSpec.vertical(30)
    except ValueError:
        pass
    else:
        raise AssertionError("non power-of-two size accepted")

    print("pywavblur smoke test passed:", repr(full), repr(k20))


if __name__ == "__main__":
    main()
