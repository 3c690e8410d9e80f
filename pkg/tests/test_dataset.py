import numpy as np
import pytest

from camflow import scenes
from camflow.config import RunConfig
from camflow.dataset import load_dataset, prepare_clip, prepare_dataset
from camflow.errors import DataError


@pytest.fixture(scope="module")
def ds(tmp_path_factory):
    root = tmp_path_factory.mktemp("prepds")
    k = scenes.default_intrinsics(16, 16)
    for i in range(2):
        scenes.save_clip(scenes.generate_clip(i, 9, "orbit", k),
                         root / f"clip_{i:04d}")
    return root


CFG = dict(width=16, height=16, patch=4, dim=16, heads=2, blocks=1,
           clip_frames=9, sparse_source_len=9)


def test_missing_dir_raises(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nothing")


def test_empty_dir_raises(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_prepared_layout(ds):
    cfg = RunConfig(n_frames=5, n_extension=2, **CFG)
    preps = prepare_dataset(ds, cfg)
    assert len(preps) == 2
    p = preps[0]
    assert p.targets.shape == (5, 16, 16, 3)
    assert len(p.guidance) == 5
    # the last two timesteps duplicate the target view
    assert np.array_equal(p.targets[3], p.targets[4])
    assert np.array_equal(p.guidance.frames[3], p.guidance.frames[4])
    assert np.array_equal(p.guidance.masks[3], p.guidance.masks[4])
    assert p.endpoint_index == 3
    # frame 0 is the input image, with an all-false mask
    assert np.array_equal(p.guidance.frames[0], p.targets[0])
    assert not p.guidance.masks[0].any()


def test_resolution_mismatch_raises(ds):
    cfg = RunConfig(n_frames=5, n_extension=2, **{**CFG, "width": 32, "height": 32})
    clip = scenes.load_clip(ds / "clip_0000")
    with pytest.raises(DataError):
        prepare_clip("clip_0000", clip, cfg)


def test_motion_class_comes_from_final_mask(ds):
    cfg = RunConfig(n_frames=5, n_extension=1, **CFG)
    for p in prepare_dataset(ds, cfg):
        expected = "extensive" if p.guidance.mask_ratio_final > 0.35 else "limited"
        assert p.motion_class == expected
