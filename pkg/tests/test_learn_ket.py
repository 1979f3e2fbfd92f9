import numpy as np
import pytest

from dynlearn.dynamics import PARAM_ORDER, ParamId, ParamSchedule, UnitConvention
from dynlearn.errors import ValidationError
from dynlearn.learn_ket import (
    KetTrainingPair,
    amplitude_table,
    basis_ket,
    batch_gradients_ket,
    cnot_pairs,
    control_output,
    gradient_ket,
    qubit_a_leakage,
    terminal_lambda_ket,
    total_loss,
    train_control,
)
from dynlearn.learn_rho import TrainConfig
from dynlearn import presets

from conftest import random_ket

RAW = UnitConvention.RAW_MILLI


def random_schedule(rng, t_f=40.0):
    vals = {p: rng.normal(size=int(rng.choice([1, 2, 4]))) * 60 for p in PARAM_ORDER}
    return ParamSchedule(t_f, vals)


def fd_gradient(pair, schedule, loss, delta=1e-4):
    v = schedule.vector(trainable_only=False)
    out = np.zeros_like(v)
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = delta
        up = total_loss([pair], schedule.with_vector(v + e, False), RAW, loss=loss)
        dn = total_loss([pair], schedule.with_vector(v - e, False), RAW, loss=loss)
        out[k] = (up - dn) / (2 * delta)
    return out


def flat(g):
    return np.concatenate([g[p] for p in PARAM_ORDER])


def test_basis_ket_labels():
    assert basis_ket("10")[2] == 1
    with pytest.raises(ValidationError):
        basis_ket("2")


def test_pair_requires_normalized_kets():
    with pytest.raises(ValidationError):
        KetTrainingPair(np.ones(4), basis_ket("00"))


def test_zero_time_output_is_plain_overlap(rng):
    psi, phi = random_ket(rng), random_ket(rng)
    r = control_output(KetTrainingPair(psi, phi), ParamSchedule.constant(0.0), RAW)
    assert r.overlap == pytest.approx(np.vdot(phi, psi))
    assert r.fidelity == pytest.approx(abs(np.vdot(phi, psi)) ** 2)


def test_bias_only_phase_closed_form():
    # |00> has sigma_z(B) eigenvalue -1, so H|00> = -w eps_B |00> and the phase is +w eps_B t
    s = ParamSchedule.constant(100.0, KA=0, KB=0, Zeta=0, EpsA=0, EpsB=3.0)
    r = control_output(KetTrainingPair(basis_ket("00"), basis_ket("00")), s, RAW)
    assert r.overlap == pytest.approx(np.exp(1j * 1e-3 * 3.0 * 100.0), abs=1e-10)


def test_terminal_lambda():
    psi = basis_ket("01")
    np.testing.assert_allclose(terminal_lambda_ket(1.0, psi, "overlap"), 0)
    np.testing.assert_allclose(terminal_lambda_ket(0.5, psi, "fidelity"), -0.25 * psi)
    with pytest.raises(ValidationError):
        terminal_lambda_ket(0.5, psi, "bogus")


def test_zero_gradient_at_perfect_overlap(rng):
    s = random_schedule(rng)
    psi0 = random_ket(rng)
    psi_f = control_output(KetTrainingPair(psi0, psi0), s, RAW).final_state
    g = gradient_ket(KetTrainingPair(psi0, psi_f / np.linalg.norm(psi_f)), s, RAW)
    assert np.max(np.abs(flat(g))) <= 1e-10


@pytest.mark.parametrize("loss", ["overlap", "fidelity"])
def test_gradient_matches_finite_differences(rng, loss):
    for _ in range(3):
        s = random_schedule(rng)
        pair = KetTrainingPair(random_ket(rng), random_ket(rng))
        g = flat(gradient_ket(pair, s, RAW, loss=loss))
        fd = fd_gradient(pair, s, loss)
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-9)


def test_gradient_methods_agree(rng):
    s = random_schedule(rng)
    pair = KetTrainingPair(random_ket(rng), random_ket(rng))
    exact = flat(gradient_ket(pair, s, RAW))
    trap = flat(gradient_ket(pair, s, RAW, method="trapezoid"))
    traj = flat(gradient_ket(pair, s, RAW, method="trajectory"))
    np.testing.assert_allclose(trap, traj, atol=1e-12)
    np.testing.assert_allclose(exact, trap, atol=1e-7)
    with pytest.raises(ValidationError):
        gradient_ket(pair, s, RAW, method="nope")


def test_batch_matches_single(rng):
    s = random_schedule(rng)
    pairs = [KetTrainingPair(random_ket(rng), random_ket(rng)) for _ in range(3)]
    grads, z = batch_gradients_ket(np.stack([p.psi0 for p in pairs]),
                                   np.stack([p.psi_des for p in pairs]), s, RAW)
    for i, p in enumerate(pairs):
        np.testing.assert_allclose(flat({q: g[i] for q, g in grads.items()}),
                                   flat(gradient_ket(p, s, RAW)), atol=1e-14)


def test_identity_task_stays_put():
    s0 = ParamSchedule.constant(50.0)
    pair = KetTrainingPair(basis_ket("01"), basis_ket("01"))
    s, hist = train_control([pair], s0, TrainConfig(eta=10, epochs=5, units=RAW))
    assert hist[-1] <= 1e-20
    np.testing.assert_allclose(s.vector(), s0.vector(), atol=1e-12)


def test_phase_gate_task_converges():
    pair = KetTrainingPair(basis_ket("00"), np.exp(0.5j) * basis_ket("00"))
    s0 = ParamSchedule.constant(100.0, KA=0.0, KB=0.0, Zeta=0.1, EpsA=0.1, EpsB=0.1)
    _, hist = train_control([pair], s0, TrainConfig(eta=50, epochs=200, units=RAW))
    assert hist[-1] <= 1e-4
    assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))


@pytest.fixture(scope="module")
def cnot_result():
    p = presets.get("control-cnot")
    return train_control(p.pairs(), p.initial, p.config, p.loss)


def test_cnot_probability_mass(cnot_result):
    s, _ = cnot_result
    amps = np.abs(amplitude_table(s, RAW)) ** 2
    for i, pair in enumerate(cnot_pairs()):
        assert amps[i] @ (np.abs(pair.psi_des) ** 2) >= 0.95


def test_cnot_keeps_qubit_a_pinned(cnot_result):
    s, _ = cnot_result
    assert not s.trainable[ParamId.KA] and s.values[ParamId.KA] == (0.0,)
    assert qubit_a_leakage(s, RAW) <= 1e-10


def test_overlap_loss_prefers_no_flip(cnot_result):
    # det U = 1 per qubit-A block, so a flip always pays a phase penalty
    s, _ = cnot_result
    identity = ParamSchedule.constant(300.0)
    assert total_loss(cnot_pairs(), identity, RAW) == pytest.approx(1.0)
    assert total_loss(cnot_pairs(), s, RAW) > total_loss(cnot_pairs(), identity, RAW)


def test_empty_pairs_rejected():
    with pytest.raises(ValidationError):
        train_control([], ParamSchedule.constant(1.0), TrainConfig(units=RAW))
