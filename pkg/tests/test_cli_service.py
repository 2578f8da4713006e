"""CLI commands (in-process) and the HTTP service."""

import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from semsplat import cli
from semsplat.dataset_io import (load_checkpoint, load_dataset, load_image,
                                 load_query_embeddings, read_metrics_log)
from semsplat.render import render
from semsplat.semantics import resolve_query
from semsplat.service import create_app, rle_encode

DATA = Path(__file__).parent / "data"
GOLDEN = str(DATA / "golden_dataset")
CKPT = str(DATA / "golden_scene.ckpt")
LOOKUP = str(DATA / "query_lookup.bin")


def rle_decode(rle):
    flat = np.zeros(int(np.prod(rle["size"])), dtype=bool)
    pos, value = 0, False
    for run in rle["counts"]:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    assert pos == flat.size
    return flat.reshape(rle["size"])


class TestRleEncode:
    def test_round_trip_random_masks(self, rng):
        for _ in range(10):
            mask = rng.random((9, 13)) < 0.4
            np.testing.assert_array_equal(rle_decode(rle_encode(mask)), mask)

    def test_leading_one_starts_with_zero_run(self):
        mask = np.array([[True, True, False, True]])
        rle = rle_encode(mask)
        assert rle["counts"] == [0, 2, 1, 1]
        assert rle["size"] == [1, 4]

    def test_empty_mask(self):
        rle = rle_encode(np.zeros((0, 0), dtype=bool))
        assert rle["counts"] == []


class TestCli:
    def test_train_writes_checkpoint_and_log(self, tmp_path, capsys):
        ck = tmp_path / "trained.ckpt"
        log = tmp_path / "metrics.ndjson"
        rc = cli.main(["train", "--dataset", GOLDEN, "--checkpoint", str(ck),
                       "--iterations", "25", "--seed", "3", "--log", str(log)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "trained 25 iterations" in out
        scene = load_checkpoint(ck)
        assert len(scene.gaussians) > 0
        entries = read_metrics_log(log)
        assert entries[-1]["iteration"] <= 25
        assert "psnr" in entries[-1]

    def test_render_frame(self, tmp_path):
        out = tmp_path / "frame0.png"
        rc = cli.main(["render", "--checkpoint", CKPT, "--dataset", GOLDEN,
                       "--frame", "0", "--out", str(out)])
        assert rc == 0
        img = load_image(out)
        assert img.shape == (64, 64, 3)

    def test_render_pose_matches_frame(self, tmp_path):
        camera = load_dataset(GOLDEN).cameras[2]
        pose = json.dumps({
            "camera_to_world": camera.camera_to_world().tolist(),
            "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
            "width": camera.width, "height": camera.height})
        by_frame = tmp_path / "frame.png"
        by_pose = tmp_path / "pose.png"
        cli.main(["render", "--checkpoint", CKPT, "--dataset", GOLDEN,
                  "--frame", "2", "--out", str(by_frame)])
        cli.main(["render", "--checkpoint", CKPT, "--pose", pose,
                  "--out", str(by_pose)])
        assert by_frame.read_bytes() == by_pose.read_bytes()

    def test_render_frame_out_of_range(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["render", "--checkpoint", CKPT, "--dataset", GOLDEN,
                      "--frame", "99", "--out", str(tmp_path / "x.png")])

    def test_query_prints_disambiguated_label(self, tmp_path, capsys):
        rc = cli.main(["query", "coffee", "--checkpoint", CKPT,
                       "--dataset", GOLDEN, "--frame", "0",
                       "--lookup", LOOKUP])
        assert rc == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert first.startswith("query 'coffee' -> coffee machine (relevancy")

    def test_query_writes_mask(self, tmp_path, capsys):
        mask_path = tmp_path / "mask.png"
        cli.main(["query", "coffee", "--checkpoint", CKPT, "--dataset", GOLDEN,
                  "--lookup", LOOKUP, "--out", str(mask_path)])
        mask = load_image(mask_path)
        values = set(np.unique(mask))
        assert values <= {0.0, 1.0}
        assert mask.any()

    def test_query_nothing_above_threshold(self, capsys):
        rc = cli.main(["query", "coffee", "--checkpoint", CKPT,
                       "--dataset", GOLDEN, "--lookup", LOOKUP,
                       "--threshold", "1.0"])
        assert rc == 0
        assert "no label above threshold" in capsys.readouterr().out

    def test_eval_reports_metrics(self, capsys):
        rc = cli.main(["eval", "--checkpoint", CKPT, "--dataset", GOLDEN])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        # the checkpoint is the scene the dataset was rendered from, so the
        # only photometric error is 8-bit image quantization
        assert report["psnr"] > 40.0
        assert report["miou"] == 1.0
        assert report["num_gaussians"] == 20


@pytest.fixture
def service(tmp_path):
    scene = load_checkpoint(CKPT)
    live_ckpt = tmp_path / "live.ckpt"
    live_ckpt.write_bytes(Path(CKPT).read_bytes())
    app = create_app(scene, cameras=load_dataset(GOLDEN).cameras,
                     lookup=load_query_embeddings(LOOKUP),
                     checkpoint_path=live_ckpt)
    return TestClient(app), live_ckpt


class TestService:
    def test_health(self, service):
        client, _ = service
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "num_gaussians": 20}

    def test_render_matches_cli_bytes(self, service, tmp_path):
        client, _ = service
        cli_out = tmp_path / "cli.png"
        cli.main(["render", "--checkpoint", CKPT, "--dataset", GOLDEN,
                  "--frame", "0", "--out", str(cli_out)])
        resp = client.get("/render", params={"frame": 0})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content == cli_out.read_bytes()

    def test_render_by_pose(self, service):
        client, _ = service
        camera = load_dataset(GOLDEN).cameras[1]
        pose = json.dumps({
            "camera_to_world": camera.camera_to_world().tolist(),
            "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
            "width": camera.width, "height": camera.height})
        by_pose = client.get("/render", params={"pose": pose})
        by_frame = client.get("/render", params={"frame": 1})
        assert by_pose.content == by_frame.content

    def test_render_validation_errors(self, service):
        client, _ = service
        assert client.get("/render").status_code == 400
        assert client.get("/render", params={"frame": 99}).status_code == 400
        assert client.get("/render", params={"pose": "{bad"}).status_code == 400

    def test_query_returns_ranked_labels_with_rle_masks(self, service):
        client, _ = service
        resp = client.post("/query", json={"prompt": "coffee", "frame": 0})
        assert resp.status_code == 200
        body = resp.json()
        assert body["query"] == "coffee"
        top = body["ranked"][0]
        assert top["label"] == "coffee machine"
        assert top["relevancy"] > 0.5

        scene = load_checkpoint(CKPT)
        camera = load_dataset(GOLDEN).cameras[0]
        lookup = load_query_embeddings(LOOKUP)
        expected = resolve_query(scene, lookup["coffee"], camera,
                                 query_text="coffee")
        np.testing.assert_array_equal(rle_decode(top["mask"]),
                                      expected.ranked[0].pixel_mask)
        assert top["gaussian_ids"] == expected.ranked[0].gaussian_ids.tolist()

    def test_query_validation(self, service):
        client, _ = service
        assert client.post("/query", json={"prompt": "coffee", "frame": 0,
                                           "threshold": 2.0}).status_code == 400

    def test_query_unknown_prompt_means_503(self, service):
        client, _ = service
        resp = client.post("/query", json={"prompt": "volcano", "frame": 0})
        assert resp.status_code == 503

    def test_edit_recolor_changes_render_and_persists(self, service):
        client, live_ckpt = service
        before = client.get("/render", params={"frame": 0}).content
        resp = client.post("/edit", json={
            "op": "recolor", "label": "coffee machine",
            "params": {"rgb": [0.9, 0.1, 0.1]}})
        assert resp.status_code == 200
        assert resp.json()["edited"] == 7
        after = client.get("/render", params={"frame": 0}).content
        assert after != before
        # dictionary unchanged by an appearance edit
        summary = client.get("/scene/summary").json()
        assert summary["dictionary"] == ["coffee machine", "kettle", "apple"]
        # checkpoint persisted: a fresh load renders the edited scene
        reloaded = load_checkpoint(live_ckpt)
        camera = load_dataset(GOLDEN).cameras[0]
        from semsplat.dataset_io import encode_image_png
        assert encode_image_png(render(reloaded, camera).color) == after

    def test_edit_delete_by_ids(self, service):
        client, _ = service
        resp = client.post("/edit", json={"op": "delete", "ids": [0, 1, 2]})
        assert resp.status_code == 200
        assert resp.json()["num_gaussians"] == 17
        assert client.get("/health").json()["num_gaussians"] == 17

    def test_edit_translate_round_trip(self, service):
        client, _ = service
        before = client.get("/render", params={"frame": 0}).content
        t = [0.4, -0.2, 0.3]
        client.post("/edit", json={"op": "translate", "label": "kettle",
                                   "params": {"offset": t}})
        moved = client.get("/render", params={"frame": 0}).content
        assert moved != before
        client.post("/edit", json={"op": "translate", "label": "kettle",
                                   "params": {"offset": [-v for v in t]}})
        # png encodes 8-bit values, and the float round trip stays well
        # below half a quantization step
        assert client.get("/render", params={"frame": 0}).content == before

    def test_edit_validation_errors(self, service):
        client, _ = service
        assert client.post("/edit", json={"op": "explode", "ids": [0]}) \
            .status_code == 400
        assert client.post("/edit", json={"op": "recolor", "ids": [0],
                                          "params": {}}).status_code == 400
        assert client.post("/edit", json={"op": "recolor",
                                          "params": {"rgb": [1, 0, 0]}}) \
            .status_code == 400

    def test_failed_edit_leaves_snapshot_untouched(self, service):
        client, _ = service
        before = client.get("/render", params={"frame": 0}).content
        resp = client.post("/edit", json={"op": "recolor", "ids": [0],
                                          "params": {"rgb": [7.0, 0.0, 0.0]}})
        assert resp.status_code == 400
        assert client.get("/render", params={"frame": 0}).content == before

    def test_concurrent_edit_conflict(self, service):
        client, _ = service
        # simulate an in-flight edit by holding the lock
        assert client.app.state.edit_lock.acquire(blocking=False)
        try:
            resp = client.post("/edit", json={"op": "delete", "ids": [0]})
            assert resp.status_code == 409
        finally:
            client.app.state.edit_lock.release()
        # lock released: edits work again
        assert client.post("/edit", json={"op": "delete", "ids": [0]}) \
            .status_code == 200

    def test_queries_read_latest_committed_snapshot(self, service):
        client, _ = service
        client.post("/edit", json={"op": "delete", "label": "kettle"})
        resp = client.post("/query", json={"prompt": "kettle", "frame": 0})
        assert resp.status_code == 200
        # the label survives in the dictionary but no gaussian carries it
        for hit in resp.json()["ranked"]:
            if hit["label"] == "kettle":
                assert hit["gaussian_ids"] == []

    def test_scene_summary(self, service):
        client, _ = service
        summary = client.get("/scene/summary").json()
        assert summary["num_gaussians"] == 20
        assert summary["num_frames"] == 10
        assert summary["embedding_dim"] == 8
        assert summary["sh_degree"] == 0
        assert summary["negative_phrases"] == ["object", "things", "stuff",
                                               "texture"]
