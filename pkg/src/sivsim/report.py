"""Desk-scale acceptance figures regenerated by ``sivsim report``."""
from __future__ import annotations

import math

import numpy as np

from . import config as C
from . import ensemble as E
from . import fitting as F
from . import overlap as O
from . import photons as P
from . import rates as R
from . import spectra as S
from .units import fwhm_to_rate


def _check(name, value, ok, target):
    return {"criterion": name, "value": value, "target": target, "pass": bool(ok)}


def acceptance_summary(cfg=None):
    cfg = cfg or C.default_config()
    model = C.build_model(cfg)
    rp = model.rates
    out = []

    tl = R.transform_limit(1.72e-9)
    out.append(_check("transform_limit_1p72ns_hz", tl,
                      abs(tl - 92.5e6) <= 0.1e6 and 94e6 <= 1.03 * tl, "92.5 MHz +- 0.1; 94 within +3%"))

    t4, t295 = R.lifetime(rp, 4.0), R.lifetime(rp, 295.0)
    out.append(_check("lifetime_4K_s", t4, abs(t4 - 1.72e-9) <= 0.04e-9, "1.72 +- 0.04 ns"))
    out.append(_check("lifetime_295K_s", t295, abs(t295 - 1.28e-9) <= 0.06e-9, "1.28 +- 0.06 ns"))

    ratio = R.exchange_up(1.0, 258.1e9, 4.0)
    out.append(_check("boltzmann_ratio_4K", ratio, abs(ratio - 0.0452) <= 1e-4, "0.0452 +- 1e-4"))

    w4, w50 = R.line_weights(model, 4.0), R.line_weights(model, 50.0)
    out.append(_check("weight_C_4K", w4["C"], abs(w4["C"] - 0.71) <= 0.02, "0.71 +- 0.02"))
    out.append(_check("weight_AB_50K_minus_4K", w50["A"] + w50["B"] - w4["A"] - w4["B"],
                      w50["A"] + w50["B"] > w4["A"] + w4["B"], "> 0"))
    zb = R.zpl_photon_budget(model, 4.0)
    out.append(_check("zpl_photon_budget_4K", zb, abs(zb - 0.497) <= 0.02, "0.497 +- 0.02"))

    widths = {lab: R.effective_linewidth(model, 4.0, lab) for lab in R.LINE_LABELS}
    up = R.exchange_up(rp.gamma_down_exchange, model.excited_levels().splitting, 4.0)
    out.append(_check("linewidths_4K_hz", widths,
                      abs(widths["C"] - 136e6) <= 15e6 and abs(widths["D"] - 119e6) <= 15e6
                      and all(250e6 <= widths[k] <= 530e6 for k in "AB"),
                      "C 136+-15, D 119+-15, A/B in [250, 530] MHz"))
    out.append(_check("gamma_up_width_C_hz", up / (2 * math.pi),
                      abs(up / (2 * math.pi) - 21e6) <= 3e6, "21 +- 3 MHz"))

    ov = O.spectral_overlap(136e6, 119e6, 6e6)
    out.append(_check("overlap_136_119_6MHz", ov, ov >= 0.91, ">= 0.91"))

    sample = E.generate(C.build_ensemble_config(cfg))
    gaps = np.array(O.pairwise_detunings(sample.line_records))
    counts = [int((gaps < 94e6).sum()), int((gaps < 28.2e6).sum())]
    out.append(_check("ensemble_gap_counts", counts, counts == [11, 4], "[11, 4]"))
    mp = O.match_probability(sample.line_records, 94e6)
    out.append(_check("match_probability_94MHz", mp, mp > 0.5, "> 0.5"))
    sep = E.class_separation(sample)
    out.append(_check("class_separation_hz", sep, abs(sep - 5e9) <= 0.5e9, "5 +- 0.5 GHz"))
    spread = E.ground_splitting_spread(sample)
    out.append(_check("ground_splitting_half_range_hz", spread, spread <= 1e9, "<= 1 GHz"))

    pump = decay = 1e8
    rm = P.two_level_matrix(pump, decay)
    rate = pump * decay / (pump + decay)
    stream = P.simulate_stream(rm, 1e6 / rate, seed=cfg["seed"])
    k = pump + decay
    h = P.g2_estimate(stream, 0.05 / k, 5.0 / k)
    an = P.analytic_g2_two_level(pump, decay, h.lags).g2
    rms = float(np.sqrt(np.mean((h.g2 - an) ** 2)))
    out.append(_check("g2_two_level_rms", rms, rms <= 0.05, "<= 0.05"))
    rm_def = R.build_rate_matrix(model, 4.0, cfg["stream"]["pump"])
    sd = P.simulate_stream(rm_def, 2e-4, seed=cfg["seed"])
    g0 = float(P.g2_estimate(sd, 0.1e-9, 1e-9).g2[0])
    out.append(_check("g2_zero_defaults", g0, g0 < 0.5, "< 0.5"))

    x = np.linspace(-1e9, 1e9, 201)
    true = [0.1, 5e7, 1.36e8, 2.0]
    fit = F.fit_multi_lorentzian(S.Spectrum("PLE", x, F.multi_lorentzian_model(x, true)), 1)
    err = max(abs(fit.params[n] - t) / abs(t) for n, t in zip(fit.names, true))
    out.append(_check("single_lorentzian_roundtrip_rel", err, err <= 1e-6, "<= 1e-6"))

    x = np.linspace(-250e9, 250e9, 2001)
    pl = S.pl_spectrum(model, 4.0, cfg["pl"]["resolution_hz"], x)
    pfit = F.fit_multi_voigt(pl, 4)
    areas = F.line_areas(pfit, 4)
    split = pfit.params["position1"] - pfit.params["position0"]
    out.append(_check("pl_fit_weight_C", areas[1] / areas.sum(),
                      pfit.converged and abs(areas[1] / areas.sum() - 0.71) <= 0.02,
                      "0.71 +- 0.02"))
    out.append(_check("pl_fit_ground_splitting_hz", split,
                      abs(split - model.ground_levels().splitting) <= 1e-6 * split,
                      "46.68 GHz, noiseless"))

    edges = np.arange(0.0, 20e-9 + 12.5e-12, 25e-12)
    decay = S.decay_histogram(model, 4.0, edges, 1e6, seed=cfg["seed"])
    tau = F.fit_exponential(decay).params["tau"]
    out.append(_check("decay_fit_tau_4K_s", tau, abs(tau - 1.72e-9) <= 0.04e-9, "1.72 +- 0.04 ns"))

    sat = {}
    for i_sat in (730e3, 56e3):
        s = S.saturation_curve(S.SaturationParams(i_sat, 1.0), np.linspace(0, 10, 12))
        r = F.fit_saturation(s)
        sat[str(int(i_sat))] = r.params["i_sat"]
    ok = all(abs(v - float(k)) <= 1e-6 * float(k) for k, v in sat.items())
    out.append(_check("saturation_roundtrip", sat, ok and 730e3 / 56e3 > 10, "exact; ratio > 10"))
    return {"checks": out, "all_pass": all(c["pass"] for c in out),
            "gamma_up_rate": up, "gamma_down_rate": rp.gamma_down_exchange,
            "dephasing_rate": rp.gamma_dephase, "dephasing_width_hz": 2 * rp.gamma_dephase / fwhm_to_rate(1)}
