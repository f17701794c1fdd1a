"""Scalar, loop-per-neuron replay of one layer step, kept free of any library code."""
import math


def floor_grid(x, frac_bits, lo, hi):
    n = math.floor(x * 2**frac_bits)
    n = max(lo, min(hi, n))
    return n / 2**frac_bits


def oracle_step(state, weights, spikes, p, vmem_fmt=None):
    """Advance ``state`` (dict of per-neuron lists) one step; return fired flags.

    ``weights[i][j]`` is input i -> neuron j; ``vmem_fmt`` is an optional
    ``(frac_bits, min_int, max_int)`` triple for truncating potentials.
    """
    n = len(state["v"])
    v, theta, refrac = list(state["v"]), list(state["theta"]), list(state["refrac"])
    integrated = [False] * n
    for j in range(n):
        if refrac[j] > 0:
            refrac[j] -= 1
            continue
        integrated[j] = True
        drive = 0.0
        for i, s in enumerate(spikes):
            if s:
                drive += weights[i][j]
        v[j] = v[j] + (p["v_rest"] - v[j]) / p["tau_mem"] + drive
    fired = [False] * n
    for j in range(n):
        theta[j] = theta[j] * (1.0 - 1.0 / p["tau_theta"])
        if integrated[j] and v[j] >= p["v_thresh_base"] + theta[j]:
            fired[j] = True
            v[j] = p["v_reset"]
            theta[j] += p["theta_inc"]
            refrac[j] = p["t_refrac"]
    count = sum(fired)
    for j in range(n):
        if not fired[j] and count:
            lowered = v[j] - p["w_inh"] * count
            if v[j] > p["v_reset"]:
                v[j] = max(lowered, p["v_reset"])
    if vmem_fmt is not None:
        v = [floor_grid(x, *vmem_fmt) for x in v]
    state.update(v=v, theta=theta, refrac=refrac)
    return fired
