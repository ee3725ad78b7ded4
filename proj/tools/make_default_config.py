#!/usr/bin/env python3
"""Writes configs/default.json: a synthetic, self-consistent model bundle.

Shapes are illustrative (lognormal runtimes and token lengths, cosine
diurnal rates); the targeting step in the simulator rescales the means to
each scenario's share and utilization, so only relative magnitudes matter.
"""

import json
import math
import sys
from pathlib import Path
from statistics import NormalDist

HOUR = 3600
N01 = NormalDist()


def diurnal(hour, peak, amp):
    return amp * math.cos(2 * math.pi * (hour - peak) / 24.0)


def alr_profile(peak, amp):
    """ALR means relative to the peak hour, hour-ascending, reference skipped."""
    ref = int(round(peak)) % 24
    logw = [diurnal(h + 0.5, peak, amp) for h in range(24)]
    return ref, [logw[h] - logw[ref] for h in range(24) if h != ref]


def lognormal_log_quantiles(median_s, sigma):
    return [math.log(median_s) + sigma * N01.inv_cdf(p / 100.0) for p in range(1, 100)]


BATCH = [
    # name, per-day weekday/weekend means, alpha, diurnal peak/amp, time limits (h) with counts,
    # gpu choices with counts per time limit
    ("low", 90.0, 63.0, 0.15, 14.0, 0.6, [(1, 500), (2, 350), (4, 200)], [(1, 700), (2, 300)]),
    ("medium", 30.0, 21.0, 0.2, 13.0, 0.5, [(4, 300), (8, 250), (12, 120)], [(2, 500), (4, 300)]),
    ("high", 4.0, 2.8, 0.25, 11.0, 0.4, [(12, 120), (24, 80)], [(4, 150), (8, 90)]),
]
WEEK_OF_MONTH = [0.04, 0.0, -0.03, 0.02, -0.06]
RUNTIME_SIGMA = 1.1
RUNTIME_MEDIAN_FRAC = 0.5


def batch_group(name, wd, we, alpha, peak, amp, tls, gpus):
    ref, alr = alr_profile(peak, amp)
    quantiles = [{"tl_s": 0, "gpu": 0, "support": 10000,
                  "log_runtime": lognormal_log_quantiles(RUNTIME_MEDIAN_FRAC * tls[1][0] * HOUR, RUNTIME_SIGMA + 0.2)}]
    tl_list = []
    for i, (tl_h, count) in enumerate(tls):
        tl = tl_h * HOUR
        tl_list.append({"tl_s": tl, "count": count, "gpus": [{"gpu": g, "count": c} for g, c in gpus]})
        quantiles.append({"tl_s": tl, "gpu": 0, "support": count * 4,
                          "log_runtime": lognormal_log_quantiles(RUNTIME_MEDIAN_FRAC * tl, RUNTIME_SIGMA)})
        for j, (g, c) in enumerate(gpus):
            # The rarest leaf stays under the gate and backs off to its time-limit node.
            support = 20 if (i == len(tls) - 1 and j == len(gpus) - 1) else count * c // 10
            quantiles.append({"tl_s": tl, "gpu": g, "support": support,
                              "log_runtime": lognormal_log_quantiles(RUNTIME_MEDIAN_FRAC * tl * (1.1 if j else 0.9),
                                                                     RUNTIME_SIGMA)})
    return {
        "group": name,
        "arrivals": {"weekday_effect": math.log(wd), "weekend_effect": math.log(we),
                     "week_of_month_effects": WEEK_OF_MONTH, "dispersion": alpha},
        "intraday": {"alr_mean": alr, "alr_var": [0.08] * 23, "reference_hour": ref, "shrinkage": 0.5},
        "jobs": {"add_alpha": 1.0, "quantile_gate": 50, "time_limits": tl_list, "quantiles": quantiles},
    }


def power_minutes(per_gpu_kw, rel_sd, minutes=60):
    mean, sd, p5, p95 = [], [], [], []
    for t in range(minutes):
        warm = min(1.0, 0.55 + 0.09 * t)  # load/initialization ramp over the first minutes
        m = per_gpu_kw * warm * (1.0 + 0.04 * math.sin(t / 7.0))
        s = per_gpu_kw * rel_sd
        mean.append(m)
        sd.append(s)
        p5.append(max(0.0, m - 1.645 * s))
        p95.append(m + 1.645 * s)
    return {"mean": mean, "std": sd, "p5": p5, "p95": p95}


def power_section():
    templates = []
    bins = []
    per_group_kw = {"low": 0.19, "medium": 0.22, "high": 0.24}
    for name, _, _, _, _, _, tls, gpus in BATCH:
        base = per_group_kw[name]
        templates.append({"group": name, "support_count": 10000, "ar1_phi": 0.75, **power_minutes(base, 0.04)})
        for tl_h, count in tls:
            tl = tl_h * HOUR
            templates.append({"group": name, "tl_s": tl, "support_count": count, "ar1_phi": 0.7,
                              **power_minutes(base * 1.03, 0.035)})
            for g, c in gpus:
                templates.append({"group": name, "tl_s": tl, "gpu": g, "support_count": count * c // 1000 + 100,
                                  "ar1_phi": 0.65, **power_minutes(base * (1.0 + 0.02 * g), 0.035)})
                edges = [int(0.1 * tl), int(0.5 * tl)]
                bins.append({"group": name, "tl_s": tl, "gpu": g, "edges_s": edges})
                templates.append({"group": name, "tl_s": tl, "gpu": g, "runtime_bin": 1, "support_count": 400,
                                  "ar1_phi": 0.8, **power_minutes(base * 1.05, 0.03)})
    return {"noise_factor": 1.0, "hw_factor": 2.6, "template_gate": 194, "runtime_bins": bins,
            "templates": templates}


INFERENCE = [
    # name, family, base requests/min, evening peak hour, amplitude, alpha, token median, token sigma
    ("Code", "code", 4.0, 15.0, 0.55, 0.03, 90.0, 1.2),
    ("ConvQ1", "conversation", 3.0, 20.0, 0.70, 0.015, 120.0, 0.8),
    ("ConvQ2", "conversation", 3.0, 20.5, 0.65, 0.015, 220.0, 0.7),
    ("ConvQ3", "conversation", 2.5, 21.0, 0.60, 0.02, 380.0, 0.6),
    ("ConvQ4", "conversation", 2.0, 21.5, 0.55, 0.02, 600.0, 0.5),
]


def token_histogram(median, sigma, support, n=20000):
    dist = NormalDist(math.log(median), sigma)
    hist = []
    for y in range(1, support + 1):
        p = dist.cdf(math.log(y + 0.5)) - dist.cdf(math.log(max(y - 0.5, 1e-9)))
        c = int(round(n * p))
        if c > 0:
            hist.append([y, c])
    return hist


def inference_group(name, family, base, peak, amp, alpha, med, sig):
    weekday, weekend = [], []
    for slot in range(96):
        h = (slot + 0.5) / 4.0
        lr = math.log(base) + diurnal(h, peak, amp)
        weekday.append(lr)
        weekend.append(lr + math.log(0.7))
    support = 5000 if family == "code" else 1200
    return {"group": name, "family": family, "dispersion": alpha,
            "log_rate": {"weekday": weekday, "weekend": weekend},
            "tokens": {"histogram": token_histogram(med, sig, support)}}


LLM = [
    # id, g, B, per-class tpot (F, M, S)
    ("llm-1a", 1, 8, (0.025, 0.04, 0.065)),
    ("llm-1b", 1, 12, (0.03, 0.05, 0.08)),
    ("llm-1c", 1, 16, (0.035, 0.055, 0.09)),
    ("llm-2a", 2, 8, (0.03, 0.05, 0.08)),
    ("llm-2b", 2, 12, (0.035, 0.055, 0.09)),
    ("llm-2c", 2, 16, (0.04, 0.06, 0.1)),
    ("llm-4a", 4, 16, (0.045, 0.07, 0.11)),
]


def llm_templates():
    out = []
    for tid, g, b, tpots in LLM:
        for cls, tpot in zip("FMS", tpots):
            out.append({"template_id": tid, "g": g, "B": b, "tpot_s": tpot,
                        "rho_kw": round(0.7 * g / b, 6), "speed_class": cls})
    return out


def bundle():
    return {
        "schema_version": 1,
        "calendar": {"epoch": "2024-01-01"},
        "batch": {"groups": [batch_group(*g) for g in BATCH]},
        "power": power_section(),
        "inference": {
            "kappa": 1.2,
            "tick_s": 10,
            "token_smoothing": {"bandwidth": 5, "tau": 500},
            "groups": [inference_group(*g) for g in INFERENCE],
            "llm_templates": llm_templates(),
        },
    }


def main():
    root = Path(__file__).resolve().parent.parent
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else root / "configs" / "default.json"
    out.write_text(json.dumps(bundle(), indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
