import numpy as np
import pytest
import torch

from camflow.checkpoint import load_checkpoint, save_checkpoint
from camflow.config import (RunConfig, config_from_text, load_config,
                            parse_config_text)


class TestRunConfig:
    def test_paper_mirrored_defaults(self):
        cfg = RunConfig()
        assert cfg.alpha == 1.0
        assert cfg.gamma == 0.01
        assert cfg.lr == 1e-4

    def test_text_roundtrip_lossless(self):
        cfg = RunConfig(lr=3.0000000000000004e-4, gamma=0.1,
                        disable_anchor=True, dataset="some/path", seed=17)
        back = config_from_text(cfg.to_text())
        assert back == cfg

    def test_comments_and_blanks_ignored(self):
        overrides = parse_config_text("# a comment\n\nseed=5 # trailing\nlr=0.001\n")
        assert overrides == {"seed": 5, "lr": 0.001}

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text("not_a_key=1\n")

    def test_bad_boolean_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text("disable_anchor=maybe\n")

    def test_precedence_defaults_file_overrides(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed=5\nlr=0.01\n")
        cfg = load_config(p, {"lr": 0.5})
        assert cfg.seed == 5  # from file
        assert cfg.lr == 0.5  # flag beats file
        assert cfg.gamma == 0.01  # default preserved

    def test_layout_validation(self):
        with pytest.raises(ValueError):
            RunConfig(n_extension=9, n_frames=9)
        with pytest.raises(ValueError):
            RunConfig(n_frames=9, n_extension=1, sparse_source_len=5)

    def test_n_unique(self):
        assert RunConfig(n_frames=29, n_extension=4).n_unique == 26
        assert RunConfig().n_unique == 8

    def test_disable_tegs_zeroes_gamma(self):
        assert RunConfig(disable_tegs=True).effective_gamma == 0.0
        assert RunConfig().effective_gamma == 0.01


class TestCheckpoint:
    def _state(self):
        g = torch.Generator().manual_seed(0)
        return {
            "patch_embed.weight": torch.randn(8, 12, generator=g),
            "blocks.0.w_q_prime.weight": torch.randn(8, 8, generator=g),
            "scalar_like": torch.randn(4, generator=g).double(),
        }

    def test_bit_exact_roundtrip(self, tmp_path):
        path = tmp_path / "model.ckpt"
        state = self._state()
        save_checkpoint(path, state, "seed=3\n")
        back, cfg_text = load_checkpoint(path)
        assert cfg_text == "seed=3\n"
        assert list(back) == list(state)  # manifest order preserved
        for k in state:
            assert torch.equal(back[k], state[k])
            assert back[k].dtype == state[k].dtype

    def test_manifest_is_plain_text_header(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, self._state(), "seed=3\n")
        raw = path.read_bytes()
        header = raw.split(b"end-header\n")[0].decode()
        assert header.startswith("camflow-checkpoint v1")
        assert "patch_embed.weight f32 8 12" in header
        assert "scalar_like f64 4" in header

    def test_buffers_little_endian_in_manifest_order(self, tmp_path):
        path = tmp_path / "model.ckpt"
        state = self._state()
        save_checkpoint(path, state, "x=1\n")
        raw = path.read_bytes()
        body = raw.split(b"end-header\n", 1)[1][len("x=1\n"):]
        first = np.frombuffer(body, dtype="<f4", count=8 * 12)
        assert np.array_equal(first.reshape(8, 12),
                              state["patch_embed.weight"].numpy())

    def test_nonfinite_rejected(self, tmp_path):
        state = {"w": torch.tensor([1.0, float("nan")])}
        with pytest.raises(ValueError):
            save_checkpoint(tmp_path / "bad.ckpt", state, "")

    def test_garbage_file_rejected(self, tmp_path):
        p = tmp_path / "junk.ckpt"
        p.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ValueError):
            load_checkpoint(p)

    def test_model_state_roundtrip(self, tmp_path):
        from camflow.backbone import VideoDiT
        torch.manual_seed(1)
        m = VideoDiT(dim=8, n_heads=2, depth=1, patch=2, frames=2,
                     height=4, width=4)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, m.state_dict(), RunConfig().to_text())
        back, cfg_text = load_checkpoint(path)
        m2 = VideoDiT(dim=8, n_heads=2, depth=1, patch=2, frames=2,
                      height=4, width=4)
        m2.load_state_dict(back)
        for (n1, p1), (n2, p2) in zip(m.named_parameters(), m2.named_parameters()):
            assert n1 == n2 and torch.equal(p1, p2)
        assert config_from_text(cfg_text) == RunConfig()
