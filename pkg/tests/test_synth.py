import numpy as np
import pytest

from faceunits import (CodingConfig, CoefficientDistribution, DeformationSample,
                       GenerationError, InputError, LabeledSeriesSpec, SynthSpec,
                       WccConfig, encode, generate_labeled_series,
                       generate_planted_corpus, match_dictionaries,
                       validate_dictionary, window_wcc)
from conftest import masked_dictionary


class TestPlantedCorpus:
    def test_noise_free_single_atom_samples(self, toy_topology):
        spec = SynthSpec(topology=toy_topology, planted_atom_count=6,
                         per_group_allocation={g: 1 for g in toy_topology.group_codes()},
                         samples=30, active_atoms_per_sample=1,
                         coefficients=CoefficientDistribution(1.0, 1.0, "positive"),
                         noise_sigma=0.0, seed=4)
        data, truth, codes = generate_planted_corpus(spec)
        for n in range(30):
            active = np.flatnonzero(codes[n])
            assert active.size == 1
            np.testing.assert_array_equal(data[n], truth.atoms[:, active[0]])

    def test_ground_truth_validates(self, ibug):
        spec = SynthSpec(topology=ibug, planted_atom_count=12, samples=5, seed=0)
        _, truth, _ = generate_planted_corpus(spec)
        assert validate_dictionary(truth).ok
        norms = np.linalg.norm(truth.atoms, axis=0)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_within_group_incoherence(self, ibug):
        spec = SynthSpec(topology=ibug, planted_atom_count=12, samples=5, seed=1)
        _, truth, _ = generate_planted_corpus(spec)
        for code in ibug.group_codes():
            idx = [k for k, g in enumerate(truth.atom_groups) if g == code]
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    cos = abs(float(truth.atoms[:, idx[a]] @ truth.atoms[:, idx[b]]))
                    assert cos <= spec.max_pairwise_coherence + 1e-12

    def test_support_recovery_under_encode(self, ibug):
        # noise-free, strong coefficients: LASSO finds the exact support
        spec = SynthSpec(topology=ibug, planted_atom_count=12, samples=100,
                         active_atoms_per_sample=3,
                         coefficients=CoefficientDistribution(0.5, 1.5, "random"),
                         noise_sigma=0.0, seed=2)
        data, truth, codes = generate_planted_corpus(spec)
        cfg = CodingConfig(lam=0.05)
        hits = 0
        for n in range(100):
            z = encode(truth, DeformationSample(data[n]), cfg)
            if set(np.flatnonzero(z).tolist()) == set(np.flatnonzero(codes[n]).tolist()):
                hits += 1
        assert hits == 100

    def test_seeded_determinism(self, toy_topology):
        spec = SynthSpec(topology=toy_topology, planted_atom_count=6,
                         per_group_allocation={g: 1 for g in toy_topology.group_codes()},
                         samples=20, seed=9, active_atoms_per_sample=2)
        a_data, a_truth, a_codes = generate_planted_corpus(spec)
        b_data, b_truth, b_codes = generate_planted_corpus(spec)
        assert a_data.tobytes() == b_data.tobytes()
        assert a_truth.atoms.tobytes() == b_truth.atoms.tobytes()
        assert a_codes.tobytes() == b_codes.tobytes()

    def test_impossible_incoherence_raises(self, toy_topology):
        # 40 atoms in a 6-dimensional group cannot stay nearly orthogonal
        spec = SynthSpec(topology=toy_topology, planted_atom_count=45,
                         per_group_allocation={"LB": 40, "RB": 1, "LE": 1,
                                               "RE": 1, "NO": 1, "MO": 1},
                         samples=50, active_atoms_per_sample=2,
                         max_pairwise_coherence=0.05, seed=0)
        with pytest.raises(GenerationError):
            generate_planted_corpus(spec)

    def test_invalid_allocation(self, toy_topology):
        spec = SynthSpec(topology=toy_topology, planted_atom_count=6,
                         per_group_allocation={"LB": 6}, samples=10)
        with pytest.raises(InputError):
            generate_planted_corpus(spec)


class TestMatchDictionaries:
    def test_identity_match(self, toy_dictionary):
        report = match_dictionaries(toy_dictionary, toy_dictionary)
        assert report.min_abs_cosine == pytest.approx(1.0, abs=1e-12)
        assert report.permutation() == {k: k for k in range(6)}
        assert report.group_count_mismatches == ()

    def test_sign_and_permutation_invariance(self, ibug):
        spec = SynthSpec(topology=ibug, planted_atom_count=12, samples=5, seed=3)
        _, truth, _ = generate_planted_corpus(spec)
        # negate every atom and swap the two NO atoms (same-group shuffle)
        atoms = -truth.atoms.copy()
        no_idx = [k for k, g in enumerate(truth.atom_groups) if g == "NO"]
        atoms[:, [no_idx[0], no_idx[1]]] = atoms[:, [no_idx[1], no_idx[0]]]
        shuffled = type(truth)(atoms=atoms, atom_groups=truth.atom_groups,
                               topology=ibug, atom_names=truth.atom_names)
        report = match_dictionaries(shuffled, truth)
        assert report.min_abs_cosine == pytest.approx(1.0, abs=1e-12)
        perm = report.permutation()
        assert perm[no_idx[0]] == no_idx[1] and perm[no_idx[1]] == no_idx[0]

    def test_unrelated_dictionaries_low_similarity(self, ibug):
        means = []
        for seed in range(20):
            a = masked_dictionary(ibug, ("LB", "RB", "LE", "RE", "NO", "MO",
                                         "MO", "MO"), seed=seed)
            b = masked_dictionary(ibug, ("LB", "RB", "LE", "RE", "NO", "MO",
                                         "MO", "MO"), seed=1000 + seed)
            means.append(match_dictionaries(a, b).mean_abs_cosine)
        assert float(np.mean(means)) < 0.5

    def test_count_mismatch_reported_and_matched_on_smaller(self, toy_topology):
        a = masked_dictionary(toy_topology, ("LB", "RB", "LE", "RE", "NO",
                                             "MO", "MO"), seed=1)
        b = masked_dictionary(toy_topology, ("LB", "RB", "LE", "RE", "NO",
                                             "MO"), seed=2)
        report = match_dictionaries(a, b)
        assert report.group_count_mismatches == ("MO",)
        assert len(report.matches) == 6

    def test_topology_mismatch_rejected(self, toy_topology, ibug):
        a = masked_dictionary(toy_topology, ("MO",), seed=1)
        b = masked_dictionary(ibug, ("MO",), seed=1)
        with pytest.raises(InputError):
            match_dictionaries(a, b)


class TestLabeledSeries:
    def test_counts_labels_and_shapes(self):
        spec = LabeledSeriesSpec(videos_per_class=3, bu_channel_count=2,
                                 frames=50, seed=0)
        out = generate_labeled_series(spec)
        assert [label for _, label in out] == ["A"] * 3 + ["B"] * 3
        for series, _ in out:
            assert series.frame_count == 50
            assert series.channel_count == 5

    def test_zero_lag_zero_noise_coupling_gives_unit_wcc(self):
        spec = LabeledSeriesSpec(videos_per_class=2, bu_channel_count=2,
                                 frames=60, frame_rate=10.0,
                                 coupled_channels=(0, 1),
                                 coupling_lag_frames=0, coupling_noise=0.0,
                                 seed=1)
        cfg = WccConfig(window_seconds=2.0, lag_range_seconds=0.5)
        for series, label in generate_labeled_series(spec):
            m = window_wcc(series, cfg, 0)
            if label == "A":
                assert m[0, 1] == pytest.approx(1.0, abs=1e-12)
            else:
                assert abs(m[0, 1]) < 0.9

    def test_lagged_coupling_detected_at_lag(self):
        spec = LabeledSeriesSpec(videos_per_class=1, bu_channel_count=2,
                                 frames=100, frame_rate=10.0,
                                 coupled_channels=(0, 1),
                                 coupling_lag_frames=3, coupling_noise=0.0,
                                 seed=2)
        cfg = WccConfig(window_seconds=5.0, lag_range_seconds=0.5)
        series, label = generate_labeled_series(spec)[0]
        assert label == "A"
        m = window_wcc(series, cfg, 0)
        assert m[0, 1] >= 0.99

    def test_determinism(self):
        spec = LabeledSeriesSpec(videos_per_class=2, seed=5)
        a = generate_labeled_series(spec)
        b = generate_labeled_series(spec)
        for (sa, la), (sb, lb) in zip(a, b):
            assert la == lb
            assert sa.bu_coefficients.tobytes() == sb.bu_coefficients.tobytes()
            assert sa.head_rotation.tobytes() == sb.head_rotation.tobytes()

    def test_invalid_specs(self):
        with pytest.raises(InputError):
            LabeledSeriesSpec(coupled_channels=(0, 0))
        with pytest.raises(InputError):
            LabeledSeriesSpec(coupling_lag_frames=500, frames=100)
