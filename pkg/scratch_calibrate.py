"""Scratch calibration v2: dropout gap (crit 5) and realignment (crit 6)."""
import sys
import numpy as np
import framenet as fn


def dropout_data(seed):
    spec = fn.SyntheticSpec(
        groups=10, subclasses=2, base_dim=20, frames_per_class=200,
        group_separation=5.0, subclass_separation=2.5, noise_std=5.0, seed=seed,
    )
    d = fn.generate_synthetic(spec)                       # 4000 frames, K=20
    tr, dev = fn.split_train_dev(d, 0.5, seed)            # 2000 / 2000
    trn, mean, std = fn.normalize_global(tr)
    devn = fn.apply_normalization(dev, mean, std)
    return trn, devn


def dropout_trial(trn, devn, seed, p, epochs=60, lr=0.1, width=192):
    net = fn.init_network(
        fn.FlatInput(trn.dim),
        [fn.Dense(width), fn.Dense(width), fn.SoftmaxOutput(trn.num_classes)],
        fn.Rng(seed + 1), 0.1,
    )
    ppf = fn.num_params(net) / trn.num_frames
    ocfg = fn.OptimizerConfig(
        kind="nag", learning_rate=lr, momentum=fn.RampMomentum(0.95),
        anneal=fn.EveryNIterations(80, 1.5),
    )
    tcfg = fn.TrainConfig(batch_size=512, max_epochs=epochs, tolerance=0.0,
                          dropout_p=p, shuffle_seed=seed + 2)
    net, log = fn.train(net, trn, devn, ocfg, tcfg)
    _, tr_acc = fn.evaluate(net, trn)
    _, dv_acc = fn.evaluate(net, devn)
    return ppf, tr_acc, dv_acc, tr_acc - dv_acc


def realign_data(seed):
    spec = fn.SyntheticSpec(
        groups=10, subclasses=3, base_dim=20, frames_per_class=2200,
        group_separation=8.0, subclass_separation=3.0, noise_std=2.5, seed=seed,
    )
    d = fn.generate_synthetic(spec)                       # 66k frames, K=30
    tr, dev = fn.split_train_dev(d, 0.1, seed)
    tr = fn.corrupt_labels(tr, 0.2, fn.Rng(seed + 10))
    trn, mean, std = fn.normalize_global(tr)
    devn = fn.apply_normalization(dev, mean, std)
    return trn, devn


def realign_cfgs(seed, R, epochs=8, lr=0.1):
    ocfg = fn.OptimizerConfig(kind="nag", learning_rate=lr, momentum=fn.RampMomentum(0.95))
    tcfg = fn.TrainConfig(batch_size=512, max_epochs=epochs, tolerance=0.0,
                          realign_epoch=R, shuffle_seed=seed + 2)
    return ocfg, tcfg


def fresh_net(trn, seed):
    return fn.init_network(
        fn.FlatInput(trn.dim),
        [fn.Dense(128), fn.Dense(128), fn.SoftmaxOutput(trn.num_classes)],
        fn.Rng(seed + 1), 0.1,
    )


def realign_trial(trn, devn, seed, R):
    net = fresh_net(trn, seed)
    ocfg, tcfg = realign_cfgs(seed, R)
    net, log = fn.train(net, trn, devn, ocfg, tcfg)
    frac = max((r.labels_changed for r in log.records), default=0.0)
    return frac, log.records[-1].dev_acc


def realign_disagreement(trn, seed, R):
    """Train exactly R epochs, realign once, compare to stored truth."""
    net = fresh_net(trn, seed)
    ocfg, tcfg = realign_cfgs(seed, 0, epochs=R)
    net, _ = fn.train(net, trn, devn_g, ocfg, tcfg)
    new_labels = fn.realign_labels(net, trn)
    return float((new_labels != trn.true_labels).mean())


if __name__ == "__main__":
    mode = sys.argv[1] if len(sys.argv) > 1 else "dropout"
    if mode == "dropout":
        for seed in (0, 1, 2):
            trn, devn = dropout_data(seed)
            r0 = dropout_trial(trn, devn, seed, 0.0)
            r1 = dropout_trial(trn, devn, seed, 0.1)
            print(f"seed {seed}: ppf={r0[0]:.0f}x p=0 tr={r0[1]:.3f} dev={r0[2]:.3f} gap={r0[3]:.3f} "
                  f"| p=0.1 tr={r1[1]:.3f} dev={r1[2]:.3f} gap={r1[3]:.3f} "
                  f"| smaller={r1[3] < r0[3]}", flush=True)
    else:
        for seed in (0, 1, 2):
            trn, devn = realign_data(seed)
            devn_g = devn
            globals()["devn_g"] = devn
            f0, d0 = realign_trial(trn, devn, seed, 0)
            f2, d2 = realign_trial(trn, devn, seed, 2)
            f5, d5 = realign_trial(trn, devn, seed, 5)
            dis2 = realign_disagreement(trn, seed, 2)
            corrupted = float((trn.labels != trn.true_labels).mean())
            print(f"seed {seed}: corrupt={corrupted:.3f} base dev={d0:.4f} | "
                  f"R2 frac={f2:.3f} dev={d2:.4f} dis2={dis2:.3f} | "
                  f"R5 frac={f5:.3f} dev={d5:.4f} | f2>f5={f2 > f5} devok={d2 >= d0} dis<0.2={dis2 < 0.2}",
                  flush=True)
