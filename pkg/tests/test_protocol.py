import numpy as np
import pytest
from scipy import stats

from lpir.core import Dataset, generate_gaussian_dataset, paper_gaussian_spec
from lpir.errors import ProtocolError
from lpir.protocol import (
    AnswerMessage,
    QueryMessage,
    decode_answer,
    decode_query,
    encode_answer,
    encode_query,
    run_experiment,
    server_answer,
    user_make_query,
    user_reconstruct,
)
from lpir.quantizer import LloydConfig
from lpir.schemes import TimeSharedScheme, build_compression_scheme


@pytest.fixture(scope="module")
def small_scheme():
    spec = paper_gaussian_spec()
    train = generate_gaussian_dataset(spec, 2000, seed=0)
    return build_compression_scheme(train, 2, 6,
                                    LloydConfig(k=64, restarts=2, seed=0))


@pytest.fixture(scope="module")
def test_data():
    return generate_gaussian_dataset(paper_gaussian_spec(), 500, seed=1)


class TestWireFormats:
    def test_query_golden_bytes(self):
        msg = QueryMessage(scheme_id=0x01020304, subset=(2, 5))
        blob = encode_query(msg)
        assert blob == bytes(
            [1, 0x04, 0x03, 0x02, 0x01, 0, 2, 0, 2, 0, 5, 0]
        )
        assert decode_query(blob) == msg

    def test_query_with_coin_golden_bytes(self):
        msg = QueryMessage(scheme_id=7, subset=(3,), coin=1)
        blob = encode_query(msg)
        assert blob == bytes([1, 7, 0, 0, 0, 1, 1, 1, 0, 3, 0])
        assert decode_query(blob) == msg

    def test_answer_bit_packing_golden(self):
        msg = AnswerMessage(scheme_id=1, bit_len=6, codeword_index=0b101101)
        blob = encode_answer(msg)
        assert blob[-1] == 0b10110100  # six index bits, MSB-first, zero pad
        assert decode_answer(blob) == msg

    def test_answer_zero_bits(self):
        msg = AnswerMessage(scheme_id=9, bit_len=0, codeword_index=0)
        blob = encode_answer(msg)
        assert len(blob) == 7  # header only, no payload bytes
        assert decode_answer(blob) == msg

    def test_answer_multibyte_index(self):
        msg = AnswerMessage(scheme_id=3, bit_len=12, codeword_index=0xABC)
        blob = encode_answer(msg)
        assert blob[-2:] == bytes([0xAB, 0xC0])
        assert decode_answer(blob) == msg

    def test_nonzero_padding_rejected(self):
        msg = AnswerMessage(scheme_id=3, bit_len=6, codeword_index=5)
        blob = bytearray(encode_answer(msg))
        blob[-1] |= 0b01  # dirty a padding bit
        with pytest.raises(ProtocolError):
            decode_answer(bytes(blob))

    def test_unsorted_subset_rejected(self):
        with pytest.raises(ProtocolError):
            QueryMessage(scheme_id=1, subset=(3, 2))
        with pytest.raises(ProtocolError):
            QueryMessage(scheme_id=1, subset=(2, 2))

    def test_truncated_and_oversized_queries(self):
        msg = QueryMessage(scheme_id=1, subset=(1, 2, 3))
        blob = encode_query(msg)
        with pytest.raises(ProtocolError):
            decode_query(blob[:-1])
        with pytest.raises(ProtocolError):
            decode_query(blob + b"\x00")

    def test_fuzzed_bytes_round_trip_or_error(self):
        rng = np.random.default_rng(0)
        decoded = 0
        for _ in range(2000):
            n = int(rng.integers(0, 24))
            blob = rng.bytes(n)
            for codec_dec, codec_enc in (
                (decode_query, encode_query),
                (decode_answer, encode_answer),
            ):
                try:
                    msg = codec_dec(blob)
                except ProtocolError:
                    continue
                decoded += 1
                assert codec_enc(msg) == blob
        # canonical encodings must re-encode to the identical bytes
        assert decoded >= 0


class TestQueryGeneration:
    def test_single_subset_is_requested_file(self, test_data):
        spec = paper_gaussian_spec()
        train = generate_gaussian_dataset(spec, 200, seed=3)
        scheme = build_compression_scheme(train, 1, 2,
                                          LloydConfig(k=4, restarts=1, seed=0))
        rng = np.random.default_rng(0)
        for m in range(1, 5):
            assert user_make_query(m, scheme, rng).subset == (m,)

    def test_full_subset_is_everything(self):
        spec = paper_gaussian_spec()
        train = generate_gaussian_dataset(spec, 200, seed=4)
        scheme = build_compression_scheme(train, 4, 2,
                                          LloydConfig(k=4, restarts=1, seed=0))
        rng = np.random.default_rng(0)
        for m in range(1, 5):
            assert user_make_query(m, scheme, rng).subset == (1, 2, 3, 4)

    def test_subsets_uniform_over_those_containing_m(self, small_scheme):
        rng = np.random.default_rng(5)
        counts = {}
        draws = 30_000
        for _ in range(draws):
            q = user_make_query(1, small_scheme, rng)
            counts[q.subset] = counts.get(q.subset, 0) + 1
        assert set(counts) == {(1, 2), (1, 3), (1, 4)}
        freqs = np.array([counts[s] for s in sorted(counts)])
        assert np.max(np.abs(freqs / draws - 1 / 3)) < 0.015
        chi2 = stats.chisquare(freqs)
        assert chi2.pvalue > 0.001


class TestServer:
    def test_server_never_reads_requested_index(self, small_scheme, test_data):
        rng = np.random.default_rng(6)
        q = user_make_query(2, small_scheme, rng)
        files = test_data.values[0]
        blob = encode_answer(server_answer(q, files, small_scheme))
        # replaying with any claimed index changes nothing: the answer is a
        # pure function of (query bytes, files)
        again = encode_answer(server_answer(q, files, small_scheme))
        assert blob == again

    def test_same_subset_same_answer(self, small_scheme, test_data):
        q = QueryMessage(scheme_id=small_scheme.scheme_id, subset=(1, 3))
        files = test_data.values[7]
        a1 = server_answer(q, files, small_scheme)
        a2 = server_answer(q, files, small_scheme)
        assert encode_answer(a1) == encode_answer(a2)

    def test_answer_bit_length_matches_rate(self, small_scheme, test_data):
        q = QueryMessage(scheme_id=small_scheme.scheme_id, subset=(2, 4))
        a = server_answer(q, test_data.values[0], small_scheme)
        assert a.bit_len == 6
        assert a.bit_len == small_scheme.rate * small_scheme.beta

    def test_wrong_scheme_id_rejected(self, small_scheme, test_data):
        q = QueryMessage(scheme_id=small_scheme.scheme_id + 1, subset=(1, 2))
        with pytest.raises(ProtocolError):
            server_answer(q, test_data.values[0], small_scheme)

    def test_wrong_subset_size_rejected(self, small_scheme, test_data):
        q = QueryMessage(scheme_id=small_scheme.scheme_id, subset=(1, 2, 3))
        with pytest.raises(ProtocolError):
            server_answer(q, test_data.values[0], small_scheme)


class TestReconstruction:
    def test_zero_variance_dataset_exact(self):
        values = np.tile(np.array([[2.0, -1.0], [0.5, 3.0]]), (40, 1, 1))
        ds = Dataset(values)
        scheme = build_compression_scheme(ds, 1, 1,
                                          LloydConfig(k=2, restarts=1, seed=0))
        rng = np.random.default_rng(7)
        q = user_make_query(2, scheme, rng)
        a = server_answer(q, ds.values[0], scheme)
        est = user_reconstruct(a, 2, q, scheme)
        assert np.max(np.abs(est - ds.values[0, 1])) < 1e-12

    def test_requested_index_must_be_in_subset(self, small_scheme, test_data):
        q = QueryMessage(scheme_id=small_scheme.scheme_id, subset=(1, 2))
        a = server_answer(q, test_data.values[0], small_scheme)
        with pytest.raises(ValueError):
            user_reconstruct(a, 3, q, small_scheme)

    def test_k1_scheme_zero_information_bits(self):
        spec = paper_gaussian_spec()
        train = generate_gaussian_dataset(spec, 100, seed=8)
        scheme = build_compression_scheme(train, 4, 0,
                                          LloydConfig(k=1, restarts=1, seed=0))
        rng = np.random.default_rng(9)
        q = user_make_query(1, scheme, rng)
        a = server_answer(q, train.values[0], scheme)
        assert a.bit_len == 0 and a.codeword_index == 0
        est = user_reconstruct(a, 1, q, scheme)
        assert est.shape == (3,)


class TestRunExperiment:
    def test_single_trial_transcript(self, small_scheme, test_data):
        res = run_experiment(test_data, small_scheme, 1, seed=0)
        assert len(res.transcripts) == 1
        rec = res.transcripts[0]
        assert decode_query(rec.query_bytes).subset == tuple(
            int(v) for v in res.queries.queries[0]
        )
        assert rec.answer_bits == 6
        lines = res.transcript_csv().splitlines()
        assert lines[0] == "trial,m,query_hex,answer_bits,distortion"
        assert len(lines) == 2

    def test_measured_rate_equals_nominal(self, small_scheme, test_data):
        res = run_experiment(test_data, small_scheme, 200, seed=1)
        assert res.point.rate == small_scheme.rate
        assert res.point.leakage == 0.5

    def test_time_shared_experiment_structure(self, test_data):
        spec = paper_gaussian_spec()
        train = generate_gaussian_dataset(spec, 1500, seed=10)
        s1 = build_compression_scheme(train, 1, 6,
                                      LloydConfig(k=64, restarts=1, seed=0))
        s2 = build_compression_scheme(train, 2, 6,
                                      LloydConfig(k=64, restarts=1, seed=1))
        mix = TimeSharedScheme(scheme0=s1, scheme1=s2, lam=0.5)
        res = run_experiment(test_data, mix, 400, seed=2)
        assert res.queries.queries.shape[1] == 3  # coin + padded subset
        coins = res.queries.queries[:, 0]
        assert set(np.unique(coins)).issubset({0.0, 1.0})
        assert res.point.rate == pytest.approx(2.0)  # equal-rate components
        assert res.point.leakage == pytest.approx(0.75)
