import math

import numpy as np
import pytest

import jointlimits as jl


def test_forward_kinematics_rest_pose():
    arm = jl.arm_model()
    pts = jl.forward_kinematics(arm, np.zeros(arm.n_dofs))
    assert pts.shape == (3, 3)
    np.testing.assert_allclose(pts[-1], [0.0, 0.0, -0.55], atol=1e-12)
    assert arm.dof_names[-1].startswith("elbow")


def test_oracle_and_category():
    arm = jl.arm_model()
    vm = jl.default_validity("arm")
    assert jl.is_valid(vm, jl.forward_kinematics(arm, np.zeros(4))) == [1, 1]
    up = jl.forward_kinematics(arm, np.array([math.pi, 0.0, 0.0, 0.0]))
    assert jl.category(jl.is_valid(vm, up)) == 2
    lo, hi = jl.analytic_child_range(vm, np.array([0.0, 0.0, -1.0]), 2)
    assert lo == 0.0
    assert math.degrees(hi) == pytest.approx(180.0, abs=1.0)


def test_generate_split_and_arrays():
    data, draws, frac = jl.generate("arm", 20, seed=3)
    assert data.buffer_sizes == [20, 20, 20]
    assert draws >= 60 and 0.0 < frac < 1.0
    q, x, labels, cats = data.arrays()
    assert q.shape == (60, 4) and x.shape == (60, 8)
    np.testing.assert_allclose(x[:, :4], np.sin(q))
    assert set(labels[cats == 0]) == {1}
    train, test = jl.split(data, 0.25, 1)
    assert len(train) == 45 and len(test) == 15


def test_network_gradient_matches_finite_differences():
    net = jl.glorot_network(jl.limit_network_sizes(4), 5)
    q = np.array([0.3, -0.2, 0.5, 1.0])
    g = jl.config_gradient(net, q)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (net(jl.featurize(q + e)) - net(jl.featurize(q - e))) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)
    assert -0.5 < net(jl.featurize(q)) < 0.5


def test_lcp_and_dynamics():
    f, v = jl.solve_lcp(np.array([[2.0]]), np.array([-4.0]))
    assert f[0] == pytest.approx(2.0) and abs(v[0]) < 1e-12
    arm = jl.arm_model()
    bodies = jl.default_bodies(arm)
    M = jl.mass_matrix(arm, bodies, np.array([0.1, 0.2, 0.3, 1.0]))
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_train_simulate_and_ik(tmp_path):
    data, _, _ = jl.generate("arm", 300, seed=4)
    train, test = jl.split(data, 0.1, 1)
    net, curve = jl.train(train, test, epochs=3, hidden=16, depth=2)
    assert len(curve) == 3
    assert 0.0 <= jl.evaluate(net, test)["accuracy"] <= 1.0

    arm = jl.arm_model()
    ls = jl.LimitSet(net, arm.boxes)
    jl.save_weights(net, tmp_path / "w.json")
    jl.save_limit_set(ls, tmp_path / "limits.json", "w.json")
    back = jl.load_limit_set(tmp_path / "limits.json")
    q = np.array([0.2, 0.1, 0.0, 0.8])
    assert jl.c_value(back, q) == jl.c_value(ls, q)

    cfg = jl.SimConfig()
    cfg.gravity = np.zeros(3)
    cs = jl.simulate_random_torque(ls, arm, cfg, np.full(4, 2.0), 0.2, seed=2, q0=np.zeros(4))
    assert cs.shape[0] > 0

    target = jl.forward_kinematics(arm, q)[-1]
    res = jl.solve_ik(ls, arm, target, penalty="none")
    assert res["residual"] < 1e-3


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        jl.limb_model("tail")
    bad = tmp_path / "bad.csv"
    bad.write_text("not a dataset\n")
    with pytest.raises(jl.ParseError):
        jl.load_dataset(bad)
    with pytest.raises(jl.StarvedBufferError):
        jl.generate("leg", 1000, max_draws=100)
