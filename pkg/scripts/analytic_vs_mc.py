"""Compare the analytic Q-frame error rate with Monte Carlo on a linewidth x T_R grid.

The carrier frequency is supplied to the estimator and the reference frames
are bright, so the only error left is the laser phase noise the analytic
model describes. Prints one row per grid cell.
"""
import argparse
import itertools

from tfqkd.noise_model import FrameSchedule, LinkNoise, SliceConfig, mean_er_over_qframe
from tfqkd.recovery import RecoveryConfig
from tfqkd.scenarios import simulated_er
from tfqkd.synth import BeatCarrier, RateProfile


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--linewidths-khz", type=float, nargs="+", default=[1, 5, 20])
    ap.add_argument("--t-r-us", type=float, nargs="+", default=[2, 5, 10])
    ap.add_argument("--t-q-us", type=float, default=1.6384)
    ap.add_argument("--frames", type=int, default=2500)
    ap.add_argument("--seed", type=int, default=40)
    args = ap.parse_args()

    sl = SliceConfig()
    rec = RecoveryConfig(fixed_frequency=80e6)
    print("linewidth_khz,t_r_us,er_mc,er_mc_stderr,er_analytic,rel_diff")
    for i, (lw, t_r) in enumerate(itertools.product(args.linewidths_khz, args.t_r_us)):
        sched = FrameSchedule(t_r * 1e-6, args.t_q_us * 1e-6)
        noise = LinkNoise.white_lasers(lw * 1e3)
        mc = simulated_er(BeatCarrier(80e6), noise, sched, RateProfile(400e6, 500e6), rec, sl, args.frames,
                          seed=args.seed + i)
        an = mean_er_over_qframe(noise, sched, sl)
        print(f"{lw:g},{t_r:g},{mc.er:.5f},{mc.stderr:.5f},{an:.5f},{mc.er / an - 1:+.4f}")


if __name__ == "__main__":
    main()
