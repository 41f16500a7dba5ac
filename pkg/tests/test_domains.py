import numpy as np
import pytest

from planrefine import domains, env, model
from planrefine.model import Polygon


@pytest.mark.parametrize("name", ["auv-2d", "norm-auv-2d", "onair-refuel", "sailing"])
def test_generated_instances_are_deterministic_and_refinable(name):
    a = domains.generate(domains.DomainSpec(name, 3, seed=5))
    b = domains.generate(domains.DomainSpec(name, 3, seed=5))
    assert [model.format_instance(i) for i in a] == [model.format_instance(i) for i in b]
    for inst in a:
        state = env.reset(inst)
        assert not state.feasible


def test_seeds_give_different_instances():
    a = domains.generate(domains.DomainSpec("auv-2d", 2, seed=1))
    b = domains.generate(domains.DomainSpec("auv-2d", 2, seed=2))
    assert model.format_instance(a[0]) != model.format_instance(b[0])


def test_sailing_is_one_dimensional_with_polygons():
    for inst in domains.generate(domains.DomainSpec("sailing", 3, seed=2)):
        assert inst.axis_count == 1
        assert all(isinstance(r, Polygon) for s in inst.skeleton for r in s.regions)


def test_norm_domain_sets_norm_bound():
    inst = domains.generate(domains.DomainSpec("norm-auv-2d", 1))[0]
    assert inst.b_norm == domains.NOMINAL_BOUND


def test_onair_has_refuel_duration():
    inst = domains.generate(domains.DomainSpec("onair-refuel", 1))[0]
    assert inst.skeleton[2].d_min > 0


def test_names_are_stable():
    names = [i.name for i in domains.generate(domains.DomainSpec("toy", 2, seed=0))]
    assert names == ["toy-0-000", "toy-0-001"]


def test_invalid_domain_settings():
    with pytest.raises(ValueError):
        domains.DomainSpec("mars", 1)
    with pytest.raises(ValueError):
        domains.DomainSpec("toy", 1, min_steps=4, max_steps=2)


def test_sailing_polygons_cross_the_line_even_before_filtering():
    rng = np.random.default_rng(0)
    spec = domains.DomainSpec("sailing", 1)
    for _ in range(40):
        try:
            inst = domains.gen_sailing(spec, rng)
        except model.ValidationError:
            continue
        for step in inst.skeleton:
            ys = [v[1] for v in step.regions[0].vertices]
            assert min(ys) < 0 < max(ys)
