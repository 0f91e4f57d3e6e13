import json

import numpy as np
import pytest

from screenmatch.errors import UnknownCategory
from screenmatch.evaluator import load_dataset
from screenmatch.rng import derived_rng
from screenmatch.synthcorpus import (CorpusConfig, PerturbSpec, ROLE_POOLS,
                                     SCREEN_CATEGORIES, TEMPLATES,
                                     generate_corpus_screens, generate_pairs,
                                     generate_screen, perturb, style_vector)


class TestGenerateScreen:
    def test_deterministic(self):
        a = generate_screen("login", derived_rng(7, "gen"))
        b = generate_screen("login", derived_rng(7, "gen"))
        assert a.screen_id == b.screen_id
        assert len(a.elements) == len(b.elements)
        for ea, eb in zip(a.elements, b.elements):
            assert ea.element_id == eb.element_id
            assert ea.bounds.as_list() == eb.bounds.as_list()
            assert ea.text == eb.text
            assert np.array_equal(ea.appearance_vector, eb.appearance_vector)

    def test_unknown_category(self):
        with pytest.raises(UnknownCategory):
            generate_screen("dashboard", derived_rng(0, "x"))

    @pytest.mark.parametrize("category", SCREEN_CATEGORIES)
    def test_roles_unique_and_from_template(self, category):
        s = generate_screen(category, derived_rng(3, f"roles-{category}"))
        ids = s.element_ids()
        assert len(ids) == len(set(ids))
        template_roles = {slot.role for slot in TEMPLATES[category]}
        for el in s.elements:
            assert el.element_id in template_roles
            assert el.role_label == el.element_id
        required = {slot.role for slot in TEMPLATES[category] if not slot.optional}
        assert required <= set(ids)
        assert s.screen_category == category
        assert s.app_id == f"synth.{category}"

    def test_boxes_inside_unit_square(self):
        for i in range(20):
            s = generate_screen("register", derived_rng(i, "bounds"))
            for el in s.elements:
                b = el.bounds
                assert 0.0 <= b.x1 < b.x2 <= 1.0
                assert 0.0 <= b.y1 < b.y2 <= 1.0

    def test_texts_drawn_from_slot_pool(self):
        s = generate_screen("login", derived_rng(11, "texts"))
        by_role = {slot.role: slot for slot in TEMPLATES["login"]}
        for el in s.elements:
            slot = by_role[el.element_id]
            if slot.texts:
                assert el.text in slot.texts
            else:
                assert el.text is None

    def test_ambiguous_fields_share_category(self):
        # username and password are told apart only by text and position
        s = generate_screen("login", derived_rng(0, "amb"))
        cats = {el.element_id: el.category for el in s.elements}
        assert cats["username_field"] == cats["password_field"]


def test_style_vector_deterministic_and_bounded():
    v1, v2 = style_vector("field"), style_vector("field")
    assert np.array_equal(v1, v2)
    assert v1.shape == (88,)
    assert np.all((v1 >= 0.2) & (v1 <= 0.8))
    assert not np.array_equal(style_vector("field"), style_vector("title"))


class TestPerturb:
    def base(self, tag="pert"):
        return generate_screen("login", derived_rng(0, tag), screen_id="base")

    def test_identity_spec_changes_only_ids(self):
        s = self.base()
        out, gt = perturb(s, PerturbSpec())
        assert sorted(out.element_ids()) == sorted(s.element_ids())
        assert gt == [(i, i) for i in s.element_ids()]
        assert out.screen_id == "base-p0"
        for el in s.elements:
            twin = out.element(el.element_id)
            assert twin.bounds.as_list() == el.bounds.as_list()
            assert twin.text == el.text

    def test_deterministic(self):
        s = self.base()
        spec = PerturbSpec(translate=(0.03, 0.0), style_noise_sigma=0.05,
                           text_variant_rate=0.5, insert_count=2,
                           delete_count=1, reorder=True, seed=12)
        a, gta = perturb(s, spec)
        b, gtb = perturb(s, spec)
        assert gta == gtb
        assert [el.element_id for el in a.elements] == \
            [el.element_id for el in b.elements]

    def test_gt_is_identity_over_survivors(self):
        s = self.base()
        out, gt = perturb(s, PerturbSpec(delete_count=2, insert_count=1, seed=3))
        survivors = set(out.element_ids()) - {"ins-0"}
        assert {a for a, _ in gt} == survivors
        assert all(a == b for a, b in gt)
        # ground truth preserves source element order
        order = [el.element_id for el in s.elements if el.element_id in survivors]
        assert [a for a, _ in gt] == order

    def test_delete_never_empties_screen(self):
        s = self.base()
        out, gt = perturb(s, PerturbSpec(delete_count=99, seed=1))
        assert len([e for e in out.elements if not e.element_id.startswith("ins-")]) == 1
        assert len(gt) == 1

    def test_inserts_not_in_gt(self):
        s = self.base()
        out, gt = perturb(s, PerturbSpec(insert_count=3, seed=5))
        inserted = [el for el in out.elements if el.element_id.startswith("ins-")]
        assert len(inserted) == 3
        gt_ids = {a for a, _ in gt} | {b for _, b in gt}
        assert not any(el.element_id in gt_ids for el in inserted)

    def test_translation_applied_and_clipped(self):
        s = self.base()
        out, _ = perturb(s, PerturbSpec(translate=(0.02, 0.0), seed=0))
        for el in s.elements:
            twin = out.element(el.element_id)
            assert twin.bounds.x1 == pytest.approx(el.bounds.x1 + 0.02)
            assert twin.bounds.y1 == el.bounds.y1
        # a shift past the edge clips to keep every box inside the square
        big, _ = perturb(s, PerturbSpec(translate=(5.0, 0.0), seed=0))
        for el in big.elements:
            assert el.bounds.x2 <= 1.0
        assert max(el.bounds.x2 for el in big.elements) == pytest.approx(1.0)

    def test_text_variants_stay_in_role_pool(self):
        s = self.base()
        out, _ = perturb(s, PerturbSpec(text_variant_rate=1.0, seed=2))
        changed = 0
        for el in s.elements:
            twin = out.element(el.element_id)
            pool = ROLE_POOLS.get(("login", el.role_label), ())
            if el.text is not None:
                assert twin.text in pool
                changed += twin.text != el.text
            else:
                assert twin.text is None
        assert changed > 0

    def test_style_noise_bounded(self):
        s = self.base()
        out, _ = perturb(s, PerturbSpec(style_noise_sigma=0.5, seed=4))
        for el in out.elements:
            v = el.appearance_vector
            assert np.all((v >= 0.0) & (v <= 1.0))
        moved = [not np.array_equal(out.element(e.element_id).appearance_vector,
                                    e.appearance_vector) for e in s.elements]
        assert all(moved)

    def test_reorder_permutes(self):
        s = self.base()
        out, _ = perturb(s, PerturbSpec(reorder=True, seed=8))
        assert sorted(out.element_ids()) == sorted(s.element_ids())

    @pytest.mark.parametrize("kw", [
        {"text_variant_rate": -0.1}, {"text_variant_rate": 1.1},
        {"insert_count": -1}, {"delete_count": -1},
    ])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            PerturbSpec(**kw)


class TestCorpus:
    def test_screen_ids_and_count(self):
        cfg = CorpusConfig(screens_per_category=3)
        screens = generate_corpus_screens(cfg)
        assert len(screens) == 3 * len(SCREEN_CATEGORIES)
        assert "login-000" in screens and "popup-002" in screens
        for sid, s in screens.items():
            assert s.screen_id == sid

    def test_deterministic_across_calls(self):
        cfg = CorpusConfig(screens_per_category=2, seed=5)
        a = generate_corpus_screens(cfg)
        b = generate_corpus_screens(cfg)
        assert a.keys() == b.keys()
        for sid in a:
            assert [e.element_id for e in a[sid].elements] == \
                [e.element_id for e in b[sid].elements]
            assert [e.text for e in a[sid].elements] == \
                [e.text for e in b[sid].elements]

    def test_unknown_category_rejected(self):
        with pytest.raises(UnknownCategory):
            generate_corpus_screens(CorpusConfig(categories=("login", "oops")))

    def test_generate_pairs_layout(self, tmp_path):
        cfg = CorpusConfig(screens_per_category=3, intra_pairs_per_category=2,
                           same_screen_pairs_per_category=2, seed=1)
        manifest = generate_pairs(cfg, tmp_path)
        assert manifest["generator_version"] == "synth-v1"
        assert manifest["config"] == cfg.as_dict()
        assert manifest["pair_count"] == len(SCREEN_CATEGORIES) * 4
        with open(tmp_path / "manifest.json") as f:
            assert json.load(f) == manifest
        pairs = load_dataset(tmp_path)
        assert len(pairs) == manifest["pair_count"]
        by_rel = {}
        for dp in pairs:
            by_rel.setdefault(dp.record.relation, []).append(dp)
        assert len(by_rel["intra_class"]) == len(by_rel["same_screen"])
        for dp in by_rel["intra_class"]:
            assert dp.screen_a.screen_id != dp.screen_b.screen_id
            shared = set(dp.screen_a.element_ids()) & set(dp.screen_b.element_ids())
            assert dp.record.gt_pairs == tuple((r, r) for r in sorted(shared))
        for dp in by_rel["same_screen"]:
            assert dp.screen_b.screen_id.startswith(dp.screen_a.screen_id)
            assert all(a == b for a, b in dp.record.gt_pairs)

    def test_generate_pairs_deterministic(self, tmp_path):
        cfg = CorpusConfig(screens_per_category=2, intra_pairs_per_category=1,
                           same_screen_pairs_per_category=1, seed=9)
        m1 = generate_pairs(cfg, tmp_path / "a")
        m2 = generate_pairs(cfg, tmp_path / "b")
        assert m1 == m2
        for rel in ("screens", "pairs"):
            names = sorted(p.name for p in (tmp_path / "a" / rel).glob("*.json"))
            assert names == sorted(p.name for p in (tmp_path / "b" / rel).glob("*.json"))
            for name in names:
                assert (tmp_path / "a" / rel / name).read_text() == \
                    (tmp_path / "b" / rel / name).read_text()
