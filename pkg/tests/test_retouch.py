import base64
import json
import threading

import numpy as np
import pytest

from pertouch.errors import InvalidArgumentError
from pertouch.imagecore import Image, blur_values
from pertouch.parammap import build_map, decode_pmap, set_region_score
from pertouch.retouch import (
    COMPOSITION_ORDER,
    ParametricBackend,
    RemoteBackend,
    TransferConfig,
    apply_transfer,
    feather,
    get_backend,
    quantize,
    render,
    solve_strength,
    transfer_pixel,
)
from pertouch.scoring import ATTRIBUTES, score_attribute_of_pixels, score_region
from pertouch.segmentation import grid_segmentation

from conftest import full_segmentation, smooth_image, solid_image, split_segmentation


class TestTransfer:
    def test_identity_at_zero_all_attributes(self):
        for attribute in ATTRIBUTES:
            assert transfer_pixel((13, 77, 200), attribute, 0.0) == (13, 77, 200)

    def test_brightness_one_stop(self):
        v = apply_transfer(np.array([0.25, 0.25, 0.25]), "brightness", 1.0)
        np.testing.assert_allclose(v, 0.5)

    def test_contrast_flattens_toward_mid(self):
        v = apply_transfer(np.array([0.9, 0.9, 0.9]), "contrast", -1.0)
        np.testing.assert_allclose(v, 0.5 + 0.4 * 0.2)

    def test_temperature_trades_r_for_b(self):
        v = apply_transfer(np.array([0.5, 0.5, 0.5]), "temperature", 1.0)
        assert v[0] == pytest.approx(0.65)
        assert v[1] == 0.5
        assert v[2] == pytest.approx(0.35)

    def test_colorfulness_preserves_luma(self):
        px = np.array([0.6, 0.3, 0.2])
        from pertouch.imagecore import LUMA_WEIGHTS

        luma = np.dot(LUMA_WEIGHTS, px)
        out = apply_transfer(px, "colorfulness", 0.7)
        assert np.dot(LUMA_WEIGHTS, out) == pytest.approx(luma, abs=1e-12)

    def test_out_of_range_strength_rejected(self):
        with pytest.raises(InvalidArgumentError):
            apply_transfer(np.array([0.5, 0.5, 0.5]), "brightness", 1.5)

    def test_clamps_to_unit_interval(self):
        v = apply_transfer(np.array([0.9, 0.9, 0.9]), "brightness", 1.0)
        assert (v <= 1.0).all()

    def test_per_pixel_strength_array(self):
        values = np.full((2, 2, 3), 0.25)
        u = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = apply_transfer(values, "brightness", u)
        np.testing.assert_allclose(out[0, 0], 0.25)
        np.testing.assert_allclose(out[0, 1], 0.5)


class TestFeather:
    def test_single_region_everything_one(self):
        img = solid_image(8, 8, (0, 0, 0))
        seg = grid_segmentation(img, 1, 1)
        field = feather(seg, 3.0)
        np.testing.assert_allclose(field.weight(0), 1.0, atol=1e-12)

    def test_sigma_zero_binary(self):
        seg = split_segmentation(8, 4)
        field = feather(seg, 0.0)
        assert set(np.unique(field.weight(0))) == {0.0, 1.0}

    def test_boundary_weights_interior_and_normalized(self):
        seg = split_segmentation(16, 8)
        field = feather(seg, 2.0)
        w0, w1 = field.weight(0), field.weight(1)
        # partition of unity everywhere
        np.testing.assert_allclose(w0 + w1, 1.0, atol=1e-6)
        # at the boundary columns both regions contribute
        assert 0.0 < w0[4, 8] < 1.0
        # oracle: blurred indicators renormalized, computed directly
        ind0 = (seg.labels == 0).astype(float)
        b0 = blur_values(ind0, 2.0)
        b1 = blur_values(1.0 - ind0, 2.0)
        np.testing.assert_allclose(w0, b0 / (b0 + b1), atol=1e-12)

    def test_blend_mixes_strengths(self):
        seg = split_segmentation(16, 8)
        field = feather(seg, 2.0)
        u = field.blend({0: 1.0, 1: 0.0})
        assert u[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert u[0, 15] == pytest.approx(0.0, abs=1e-9)
        assert 0.0 < u[4, 8] < 1.0


class TestSolveStrength:
    def test_target_equals_current_gives_zero(self):
        img = smooth_image(32, 32, seed=1)
        seg = full_segmentation(img)
        current = score_region(img, seg, 0).brightness
        sol = solve_strength(img, seg, 0, "brightness", current)
        assert sol.u == 0.0
        assert not sol.saturated

    def test_white_region_brightness_saturates(self):
        img = solid_image(8, 8, (255, 255, 255))
        seg = full_segmentation(img)
        sol = solve_strength(img, seg, 0, "brightness", 1.0)
        assert sol.saturated
        assert sol.score == pytest.approx(1.0)

    def test_midgray_brightness_closed_loop(self):
        img = smooth_image(32, 32, seed=2)
        seg = full_segmentation(img)
        sol = solve_strength(img, seg, 0, "brightness", 0.5)
        pixels = img.pixels.reshape(-1, 3).astype(np.float64) / 255.0
        rescored = score_attribute_of_pixels(
            quantize(apply_transfer(pixels, "brightness", sol.u)), "brightness"
        )
        assert rescored == pytest.approx(0.5, abs=0.02)
        assert rescored == sol.score

    def test_unattainable_low_target_returns_bound(self):
        img = solid_image(8, 8, (200, 200, 200))
        seg = full_segmentation(img)
        sol = solve_strength(img, seg, 0, "temperature", -1.0)
        assert sol.saturated
        assert sol.u == -1.0

    def test_monotone_strengths_for_monotone_targets(self):
        img = smooth_image(24, 24, seed=3)
        seg = full_segmentation(img)
        base = score_region(img, seg, 0).contrast
        targets = [base - 0.2, base, base + 0.2]
        strengths = [
            solve_strength(img, seg, 0, "contrast", max(-1, min(1, t))).u
            for t in targets
        ]
        assert strengths == sorted(strengths)


class TestRender:
    def test_identity_map_is_noop(self):
        img = smooth_image(48, 48, seed=4)
        seg = grid_segmentation(img, 2, 2)
        out = render(img, build_map(img, seg))
        diff = np.abs(out.pixels.astype(int) - img.pixels.astype(int)).mean()
        assert diff <= 1.0  # one quantization step

    def test_single_region_brightness_closed_loop(self):
        img = smooth_image(40, 40, seed=5)
        seg = full_segmentation(img)
        pm = build_map(img, seg)
        target = min(1.0, pm.scores[0].brightness + 0.3)
        out = render(img, set_region_score(pm, 0, "brightness", target))
        assert score_region(out, seg, 0).brightness == pytest.approx(target, abs=0.05)

    def test_monotone_closed_loop(self):
        img = smooth_image(40, 40, seed=6)
        seg = full_segmentation(img)
        pm = build_map(img, seg)
        base = pm.scores[0].temperature
        outs = []
        for delta in (-0.2, 0.0, 0.2):
            out = render(img, set_region_score(pm, 0, "temperature", base + delta))
            outs.append(score_region(out, seg, 0).temperature)
        assert outs[0] < outs[1] < outs[2]

    def test_locality_beyond_feather_band(self):
        from scipy.ndimage import distance_transform_edt

        img = smooth_image(96, 48, seed=7)
        seg = split_segmentation(96, 48)
        pm = build_map(img, seg)
        sigma = 2.0
        cfg = TransferConfig(feather_sigma=sigma)
        for attribute in ATTRIBUTES:
            base = pm.scores[0].get(attribute)
            target = max(-1.0, min(1.0, base + 0.5))
            edited = set_region_score(pm, 0, attribute, target)
            out = render(img, edited, cfg)
            # oracle: distance of region-1 pixels to region 0
            dist = distance_transform_edt(seg.labels == 1)
            far = (seg.labels == 1) & (dist > 4 * sigma)
            delta = np.abs(
                out.pixels.astype(int) - img.pixels.astype(int)
            ).max(axis=2)
            assert delta[far].max() <= 1, attribute

    def test_deterministic(self):
        img = smooth_image(32, 32, seed=8)
        seg = grid_segmentation(img, 2, 2)
        pm = set_region_score(build_map(img, seg), 1, "colorfulness", 0.4)
        assert render(img, pm) == render(img, pm)

    def test_dimension_mismatch(self):
        img = smooth_image(16, 16, seed=9)
        other = smooth_image(8, 8, seed=9)
        pm = build_map(other, grid_segmentation(other, 1, 1))
        with pytest.raises(InvalidArgumentError):
            render(img, pm)

    def test_composition_order_fixed(self):
        assert COMPOSITION_ORDER == ("temperature", "brightness", "contrast", "colorfulness")


class _LoopbackHandler:
    """Minimal HTTP server wrapping the parametric backend."""

    def __init__(self):
        from http.server import BaseHTTPRequestHandler, HTTPServer

        backend = ParametricBackend()

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = json.loads(self.rfile.read(length))
                img = Image.from_png_bytes(base64.b64decode(body["image"]))
                pm = decode_pmap(body["map"])
                out = backend.render(img, pm)
                payload = json.dumps(
                    {"image": base64.b64encode(out.png_bytes()).decode("ascii")}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def __exit__(self, *exc):
        self.server.shutdown()


class TestBackends:
    def test_get_backend_names(self):
        assert isinstance(get_backend("parametric"), ParametricBackend)
        assert isinstance(get_backend("remote", url="http://x"), RemoteBackend)
        with pytest.raises(InvalidArgumentError):
            get_backend("diffusion")

    def test_remote_matches_local(self):
        img = smooth_image(24, 24, seed=10)
        seg = grid_segmentation(img, 2, 1)
        pm = set_region_score(build_map(img, seg), 0, "brightness", 0.2)
        local = ParametricBackend().render(img, pm)
        with _LoopbackHandler() as url:
            remote = RemoteBackend(url).render(img, pm)
        assert remote == local
