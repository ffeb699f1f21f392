import json
import zlib

import numpy as np
import pytest

from agmax.augment import CutMix, Cutout, MixUp, Normalize, PolicyStage
from agmax.config import DEFAULTS, TrainConfig, load_config, parse_override
from agmax.errors import ConfigError
from agmax.presets import PRESETS
from agmax.rng import make_rng, split


class TestPresets:
    def test_cifar_cutmix_agmax(self):
        cfg = load_config("cifar-presets/cutmix-agmax")
        assert cfg["augment.mix"] == "cutmix"
        assert cfg["augment.mix_alpha"] == 1.0 and cfg["augment.mix_p"] == 0.5
        assert cfg.agreement.kind == "mi" and cfg.agreement.weight == 1.0
        assert cfg.views == 2

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_all_validate(self, name):
        cfg = load_config(name)
        assert cfg.recipe() is not None

    def test_label_smoothing_variant(self):
        assert load_config("synth-presets/standard-ls").label_smoothing == 0.1
        assert load_config("synth-presets/standard").label_smoothing == 0.0

    def test_recipe_stages(self):
        r = load_config("synth-presets/cutout-policy").recipe(mean=[0.5] * 3, std=[0.2] * 3)
        kinds = [type(s) for s in r.stages]
        assert PolicyStage in kinds and Cutout in kinds and kinds[-1] is Normalize
        assert isinstance(load_config("synth-presets/mixup").recipe().batch, MixUp)
        assert isinstance(load_config("synth-presets/cutmix").recipe().batch, CutMix)

    def test_cutout_mean_fill(self):
        r = load_config("synth-presets/cutout").recipe(mean=[0.1, 0.2, 0.3], std=[1, 1, 1])
        cut = next(s for s in r.stages if isinstance(s, Cutout))
        assert cut.fill == (0.1, 0.2, 0.3)


class TestOverrides:
    def test_parse(self):
        assert parse_override("train.lr=0.5") == ("train.lr", 0.5)
        assert parse_override("model.widths=[4, 8]") == ("model.widths", [4, 8])
        assert parse_override("augment.policy=builtin:demo") == ("augment.policy", "builtin:demo")

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_override("train.lr")

    def test_seed_argument_wins(self):
        assert load_config("synth-presets/standard", ["train.seed=3"], seed=7).seed == 7

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            TrainConfig.from_flat({"train.learning_rate": 0.1})
        assert info.value.field == "train.learning_rate"

    @pytest.mark.parametrize(
        "key,value",
        [
            ("train.lr", 0.0),
            ("train.lr", "fast"),
            ("train.epochs", 1.5),
            ("train.label_smoothing", 1.0),
            ("train.milestones", [60, 30]),
            ("agreement.weight", -1.0),
            ("agreement.kind", "cosine"),
            ("augment.hflip", 1.5),
            ("augment.normalize", 1),
            ("train.views", 1),
            ("augment.policy", "builtin:missing"),
            ("agreement.estimator", "mlp"),
        ],
    )
    def test_invalid_field(self, key, value):
        flat = {key: value}
        if key == "train.views":
            flat["agreement.kind"] = "mi"
        with pytest.raises(ConfigError) as info:
            TrainConfig.from_flat(flat)
        assert info.value.field == key

    def test_raw_lambda_signed(self):
        cfg = TrainConfig.from_flat({"agreement.kind": "mi", "agreement.raw_lambda": -0.5})
        assert cfg.agreement.weight == -0.5

    def test_cifar_shape_constraint(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_flat({"data.source": "cifar10"})


class TestConfigFile:
    def test_json_and_manifest(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"train.epochs": 3}))
        assert load_config(p).epochs == 3
        m = tmp_path / "manifest.json"
        m.write_text(json.dumps({"config": {**DEFAULTS, "train.epochs": 4}, "seed": 0}))
        assert load_config(m).epochs == 4

    def test_missing_and_invalid(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)
        arr = tmp_path / "arr.json"
        arr.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(arr)


class TestRng:
    def test_same_path_replays(self):
        assert make_rng(3, "a", 1).random() == make_rng(3, "a", 1).random()

    def test_paths_differ(self):
        draws = {make_rng(3, *p).random() for p in [(), ("a",), ("b",), ("a", 1), (1, "a")]}
        assert len(draws) == 5

    def test_split_independent_of_parent_draws(self):
        a, b = make_rng(0), make_rng(0)
        b.random(5)
        assert split(a, 2)[1].random() == split(b, 2)[1].random()

    def test_negative_key(self):
        with pytest.raises(ValueError):
            make_rng(0, -1)

    def test_string_keys_stable(self):
        # crc32-based keys do not depend on PYTHONHASHSEED
        key = zlib.crc32(b"shuffle")
        oracle = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0, spawn_key=(key,))))
        assert make_rng(0, "shuffle").integers(0, 2**31) == oracle.integers(0, 2**31)
