"""Recompute the Monte Carlo TV thresholds used by the test suite.

Runs 20 seeds at 10^6 trials per case and prints the largest observed TV
distance and the threshold (twice that) frozen into the tests.
"""

from photocells import SimulationConfig, compare, detection_pmf, sample_single_response, sample_window
from photocells import window_count_pmf

CASES = {
    "single nbar=0.1": (lambda c: sample_single_response(0.1, c), detection_pmf(0.1)),
    "single nbar=1": (lambda c: sample_single_response(1.0, c), detection_pmf(1.0)),
    "window nbar=0.1 T/tau=10": (lambda c: sample_window(0.1, 10.0, c), window_count_pmf(0.1, 10.0)),
}

if __name__ == "__main__":
    for name, (sample, pmf) in CASES.items():
        tvs = [compare(sample(SimulationConfig(1000 + s, 10**6)), pmf).tv_distance for s in range(20)]
        print(f"{name}: max TV {max(tvs):.3e}  threshold {2 * max(tvs):.3e}")
