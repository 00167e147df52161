import numpy as np
import pytest

from faceunits import (CodingConfig, ConvergenceError, DeformationSample,
                       InputError, encode, encode_series, objective_value)
from conftest import masked_dictionary
from oracles import lasso_by_enumeration, lasso_objective


def random_sample(rng, dictionary, scale=1.0):
    return DeformationSample(
        scale * rng.standard_normal(dictionary.atoms.shape[0]))


class TestEncode:
    def test_zero_input_gives_zero(self, toy_dictionary):
        z = encode(toy_dictionary, DeformationSample(np.zeros(36)))
        assert (z == 0.0).all()

    def test_orthogonal_atom_soft_threshold(self, toy_dictionary):
        # atoms of distinct groups have disjoint supports, hence orthogonal
        d = DeformationSample(toy_dictionary.atoms[:, 2])
        z = encode(toy_dictionary, d, CodingConfig(lam=0.2))
        assert z[2] == pytest.approx(0.8, abs=1e-9)
        others = np.delete(z, 2)
        assert (others == 0.0).all()

    def test_matches_enumeration_oracle(self, toy_topology):
        rng = np.random.default_rng(42)
        for trial in range(20):
            d4 = masked_dictionary(
                toy_topology, ("MO", "MO", "LE", "NO"), seed=100 + trial)
            target = random_sample(rng, d4, scale=1.5)
            got = encode(d4, target, CodingConfig(lam=0.2, tolerance=1e-12))
            want = lasso_by_enumeration(d4.atoms, target.deformation, 0.2)
            np.testing.assert_allclose(got, want, atol=1e-6)

    def test_kkt_conditions_hold(self, toy_dictionary):
        rng = np.random.default_rng(7)
        for _ in range(10):
            sample = random_sample(rng, toy_dictionary, scale=2.0)
            lam = 0.2
            z = encode(toy_dictionary, sample, CodingConfig(lam=lam))
            grad = toy_dictionary.atoms.T @ (
                sample.deformation - toy_dictionary.atoms @ z)
            slack = 1e-6 * max(1.0, np.linalg.norm(sample.deformation))
            nz = z != 0.0
            if nz.any():
                assert np.abs(grad[nz] - lam * np.sign(z[nz])).max() <= slack
            if (~nz).any():
                assert (np.abs(grad[~nz]) - lam).max() <= slack

    def test_screening_returns_exact_zero(self, toy_dictionary):
        # max_k |w_k . d| <= lam -> z stays bit-exact zero
        d = DeformationSample(0.1 * toy_dictionary.atoms[:, 0])
        z = encode(toy_dictionary, d, CodingConfig(lam=0.2))
        assert (z == 0.0).all()

    def test_scaling_homogeneity(self, toy_dictionary):
        rng = np.random.default_rng(3)
        sample = random_sample(rng, toy_dictionary)
        factor = 3.7
        cfg = CodingConfig(lam=0.2, tolerance=1e-13)
        cfg_scaled = CodingConfig(lam=0.2 * factor, tolerance=1e-13)
        base = encode(toy_dictionary, sample, cfg)
        scaled = encode(
            toy_dictionary, DeformationSample(factor * sample.deformation),
            cfg_scaled)
        np.testing.assert_allclose(scaled, factor * base, atol=1e-8)

    def test_objective_not_worse_than_zero(self, toy_dictionary):
        rng = np.random.default_rng(9)
        for _ in range(5):
            sample = random_sample(rng, toy_dictionary, scale=2.0)
            z = encode(toy_dictionary, sample, CodingConfig(lam=0.2))
            assert (lasso_objective(toy_dictionary.atoms, sample.deformation, z, 0.2)
                    <= lasso_objective(toy_dictionary.atoms, sample.deformation,
                                       np.zeros(6), 0.2) + 1e-12)

    def test_deterministic_bit_identical(self, toy_dictionary):
        sample = random_sample(np.random.default_rng(5), toy_dictionary)
        a = encode(toy_dictionary, sample)
        b = encode(toy_dictionary, sample)
        assert a.tobytes() == b.tobytes()

    def test_dimension_mismatch(self, toy_dictionary):
        with pytest.raises(InputError):
            encode(toy_dictionary, DeformationSample(np.zeros(33)))

    def test_convergence_error_carries_diagnostics(self, toy_topology):
        # a highly correlated active pair with opposite signs makes cyclic CD
        # zigzag, so a tiny sweep budget cannot reach tolerance
        d = masked_dictionary(toy_topology, ("MO", "MO"), seed=8)
        atoms = d.atoms.copy()
        rows = toy_topology.rows("MO")
        close = 0.9999 * atoms[rows, 0] + np.sqrt(1 - 0.9999 ** 2) * atoms[rows, 1]
        atoms[rows, 1] = close / np.linalg.norm(close)
        from faceunits import BasisDictionary
        hard = BasisDictionary(atoms=atoms, atom_groups=d.atom_groups,
                               topology=toy_topology, atom_names=d.atom_names)
        target = DeformationSample(20.0 * atoms[:, 0] - 20.0 * atoms[:, 1])
        with pytest.raises(ConvergenceError) as info:
            encode(hard, target, CodingConfig(lam=1e-6, max_iterations=50))
        assert info.value.iterations == 50
        assert info.value.last_update > 0


class TestEncodeSeries:
    def test_empty_sequence(self, toy_dictionary):
        out = encode_series(toy_dictionary, [])
        assert out.shape == (0, 6)

    def test_single_zero_frame(self, toy_dictionary):
        out = encode_series(toy_dictionary, [DeformationSample(np.zeros(36))])
        assert out.shape == (1, 6)
        assert (out == 0.0).all()

    def test_rows_match_per_frame_encode(self, toy_dictionary):
        rng = np.random.default_rng(12)
        frames = [random_sample(rng, toy_dictionary) for _ in range(4)]
        batch = encode_series(toy_dictionary, frames)
        for t, frame in enumerate(frames):
            np.testing.assert_array_equal(batch[t], encode(toy_dictionary, frame))

    def test_permutation_equivariance(self, toy_dictionary):
        rng = np.random.default_rng(13)
        frames = [random_sample(rng, toy_dictionary) for _ in range(5)]
        order = [3, 0, 4, 1, 2]
        direct = encode_series(toy_dictionary, [frames[i] for i in order])
        base = encode_series(toy_dictionary, frames)
        np.testing.assert_array_equal(direct, base[order])

    def test_error_names_frame(self, toy_dictionary):
        frames = [DeformationSample(np.zeros(36)), DeformationSample(np.zeros(33))]
        with pytest.raises(InputError, match="frame 1"):
            encode_series(toy_dictionary, frames)


class TestObjectiveValue:
    def test_all_zero(self, toy_dictionary):
        assert objective_value(toy_dictionary, np.zeros((3, 36)),
                               np.zeros((3, 6)), 0.2) == 0.0

    def test_zero_codes_half_squared_norm(self, toy_dictionary):
        rng = np.random.default_rng(21)
        d = rng.standard_normal(36)
        got = objective_value(toy_dictionary, d[None, :], np.zeros((1, 6)), 0.2)
        assert got == pytest.approx(0.5 * float(d @ d), rel=1e-12)

    def test_matches_direct_summation(self, toy_dictionary):
        rng = np.random.default_rng(22)
        samples = rng.standard_normal((4, 36))
        codes = rng.standard_normal((4, 6))
        expected = sum(
            lasso_objective(toy_dictionary.atoms, samples[n], codes[n], 0.2)
            for n in range(4))
        got = objective_value(toy_dictionary, samples, codes, 0.2)
        assert got == pytest.approx(expected, rel=1e-10)

    def test_dimension_mismatch(self, toy_dictionary):
        with pytest.raises(InputError):
            objective_value(toy_dictionary, np.zeros((2, 36)), np.zeros((3, 6)), 0.2)
