"""
一次性脚本：在合成流形数据上比较多视图与单视图方法的 mAP
运行方式：python scripts/compare_methods.py [--seeds 5] [--labelled-fraction 0.2] [--out table.tsv]
"""
import argparse
import os
import sys

# 添加父目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pipeline.dataset import SynthSpec, load_dataset, normalize_views, synth_multiview
from pipeline.experiments import DEFAULT_METHODS, compare_methods, format_comparison_tsv
from pipeline.inference import EncodeConfig
from pipeline.solver import Hyperparams
from utils.config_loader import load_ini
from utils.log_setup import setup_logging


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="mHDSC 方法对比")
    parser.add_argument("--data", help="使用固定的全标注数据集文件，而不是按 seed 生成合成数据")
    parser.add_argument("--methods", nargs="+", default=list(DEFAULT_METHODS))
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--labelled-fraction", type=float, default=0.2)
    parser.add_argument("--test-n", type=int, default=40)
    parser.add_argument("--manifold", default="grid2d")
    parser.add_argument("--out")
    args = parser.parse_args(argv)

    cfg = load_ini()
    setup_logging(cfg["logging_level"])
    hp = Hyperparams.from_config(cfg)
    encode_cfg = EncodeConfig.from_config(cfg)
    normalize = cfg["data_normalize"]

    if args.data:
        fixed = normalize_views(load_dataset(args.data), normalize)

        def data_for_seed(seed):
            return fixed
    else:
        def data_for_seed(seed):
            spec = SynthSpec.from_config(cfg, seed=seed)
            spec.manifold = args.manifold
            spec.n_samples += args.test_n
            data, _ = synth_multiview(spec)
            return normalize_views(data, normalize)

    rows = compare_methods(data_for_seed, args.methods, hp, encode_cfg, seeds=range(args.seeds),
                           labelled_fraction=args.labelled_fraction, n_test=args.test_n,
                           ls_ridge=cfg["inference_ls_ridge"])
    table = format_comparison_tsv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
        print(f"📁 对比结果已写入: {args.out}")
    else:
        print(table, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
