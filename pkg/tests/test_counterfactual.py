from __future__ import annotations

import hashlib
import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from gebi.biasgen import BiasSpec
from gebi.counterfactual import (
    PredictorError,
    PredictorRef,
    make_delta,
    predict,
    run_experiment,
    summarize,
)
from gebi.records import load_manifest


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


class _ScoreHandler(BaseHTTPRequestHandler):
    fixed_score: float | None = None

    def do_POST(self):
        n = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(n)
        if self.fixed_score is not None:
            score = self.fixed_score
        else:
            # deterministic pure function of the PNG bytes
            score = int.from_bytes(hashlib.sha256(body).digest()[:4], "little") / 2**32
        payload = json.dumps({"score": score}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def score_server():
    server = HTTPServer(("127.0.0.1", 0), _ScoreHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/predict"
    _ScoreHandler.fixed_score = None
    server.shutdown()


class TestToyPredictor:
    def test_all_white_is_sigma_minus_4(self):
        white = np.ones((224, 224, 3))
        assert predict(PredictorRef(), white) == pytest.approx(sigmoid(-4.0), abs=1e-12)

    def test_full_ring_frame_is_sigma_2(self):
        # a 0.10 frame on 224 px (23 px) covers the whole 22 px measurement
        # ring, so border darkness saturates at 1
        from gebi.biasgen import insert_black_frame

        white = np.ones((224, 224, 3))
        framed = insert_black_frame(white, BiasSpec(frame_thickness_frac=0.10))
        assert predict(PredictorRef(), framed) == pytest.approx(sigmoid(2.0), abs=1e-12)

    def test_default_frame_flips_bright_image(self):
        from gebi.biasgen import insert_black_frame

        white = np.ones((100, 100, 3))
        framed = insert_black_frame(white, BiasSpec(frame_thickness_frac=0.08))
        before = predict(PredictorRef(), white)
        after = predict(PredictorRef(), framed)
        # frame covers 2944 of the 3600-pixel ring: b = 1 - 656/3600
        b = 1.0 - 656.0 / 3600.0
        assert after == pytest.approx(sigmoid(6.0 * b - 4.0), abs=1e-12)
        assert before < 0.5 <= after


class TestRemotePredictor:
    def test_round_trip(self, score_server):
        _ScoreHandler.fixed_score = 0.75
        p = PredictorRef(kind="remote", endpoint=score_server, timeout=5.0)
        assert predict(p, np.ones((8, 8, 3))) == 0.75

    def test_out_of_range_rejected(self, score_server):
        _ScoreHandler.fixed_score = 1.2
        p = PredictorRef(kind="remote", endpoint=score_server, timeout=5.0)
        with pytest.raises(PredictorError, match="outside"):
            predict(p, np.ones((8, 8, 3)))

    def test_unreachable_endpoint_fails_after_retries(self):
        p = PredictorRef(kind="remote", endpoint="http://127.0.0.1:9/predict", timeout=0.2)
        with pytest.raises(PredictorError, match="unreachable"):
            predict(p, np.ones((4, 4, 3)))

    def test_endpoint_required_iff_remote(self):
        with pytest.raises(ValueError):
            PredictorRef(kind="remote")
        with pytest.raises(ValueError):
            PredictorRef(kind="builtin_toy", endpoint="http://x")


class TestDeltas:
    def test_fig4_style_flip(self):
        d = make_delta("s", "benign", 0.10, 0.89, threshold=0.5)
        assert d.delta_pp == pytest.approx(79.0)
        assert d.flipped_to_malignant
        assert not d.flipped_to_benign

    def test_flip_definition_boundaries(self):
        at = make_delta("s", "benign", 0.49, 0.5, threshold=0.5)
        assert at.flipped_to_malignant
        back = make_delta("s", "benign", 0.5, 0.49, threshold=0.5)
        assert back.flipped_to_benign
        none = make_delta("s", "benign", 0.6, 0.7, threshold=0.5)
        assert not none.flipped_to_malignant and not none.flipped_to_benign

    def test_flips_mutually_exclusive(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = make_delta("s", "benign", rng.random(), rng.random(), threshold=0.5)
            assert not (d.flipped_to_malignant and d.flipped_to_benign)
            assert abs(d.delta_pp) <= 100.0


class TestSummarize:
    def test_symmetric_deltas(self):
        deltas = [
            make_delta("a", "benign", 0.5, 0.6, 0.5),
            make_delta("b", "benign", 0.6, 0.5, 0.5),
        ]
        rep = summarize(deltas, 0.5)
        ben = rep.per_class["benign"]
        assert ben.mean_signed_pp == pytest.approx(0.0)
        assert ben.mean_abs_pp == pytest.approx(10.0)
        assert ben.max_abs_pp == pytest.approx(10.0)

    def test_single_delta(self):
        rep = summarize([make_delta("a", "malignant", 0.10, 0.89, 0.5)], 0.5)
        mal = rep.per_class["malignant"]
        assert mal.mean_signed_pp == pytest.approx(79.0)
        assert mal.mean_abs_pp == pytest.approx(79.0)
        assert mal.max_abs_pp == pytest.approx(79.0)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        deltas = [
            make_delta(f"s{i}", "benign" if i % 2 else "malignant", rng.random(), rng.random(), 0.5)
            for i in range(20)
        ]
        a = summarize(deltas, 0.5)
        b = summarize(list(reversed(deltas)), 0.5)
        assert a.to_dict() == b.to_dict()

    def test_stat_ordering_invariant(self):
        rng = np.random.default_rng(2)
        deltas = [
            make_delta(f"s{i}", "benign", rng.random(), rng.random(), 0.5) for i in range(50)
        ]
        ben = summarize(deltas, 0.5).per_class["benign"]
        assert ben.max_abs_pp >= ben.mean_abs_pp >= abs(ben.mean_signed_pp)
        assert ben.flips_to_malignant + ben.flips_to_benign <= ben.n

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([], 0.5)


class TestRunExperiment:
    def test_none_bias_zero_deltas_builtin(self, bright_manifest):
        manifest = load_manifest(bright_manifest)
        deltas, report = run_experiment(manifest, BiasSpec(kind="none"), PredictorRef())
        assert all(d.delta_pp == 0.0 for d in deltas)
        ben = report.per_class["benign"]
        assert ben.flips_to_malignant == 0 and ben.flips_to_benign == 0

    def test_none_bias_zero_deltas_remote(self, bright_manifest, score_server):
        manifest = load_manifest(bright_manifest)
        small = type(manifest)(root_dir=manifest.root_dir, entries=manifest.entries[:5])
        p = PredictorRef(kind="remote", endpoint=score_server, timeout=5.0)
        deltas, report = run_experiment(small, BiasSpec(kind="none"), p)
        assert all(d.delta_pp == 0.0 for d in deltas)
        assert report.per_class["benign"].flips_to_malignant == 0

    def test_unlabeled_excluded_from_aggregates(self, tmp_path):
        from corpus import lesion_image, write_corpus

        rng = np.random.default_rng(3)
        samples = [
            ("a", lesion_image(rng, 50, 0.9, 0.5, 0.1), "benign"),
            ("b", lesion_image(rng, 50, 0.9, 0.5, 0.1), "unlabeled"),
        ]
        manifest_path = write_corpus(tmp_path / "c", samples, with_attributions=False)
        manifest = load_manifest(manifest_path)
        deltas, report = run_experiment(manifest, BiasSpec(kind="black_frame"), PredictorRef())
        assert len(deltas) == 2
        assert report.per_class["benign"].n == 1
        assert report.per_class["malignant"].n == 0
