"""
命令行入口：synth / train / encode / predict / eval

运行方式：python cli_main.py <command> [options]
退出码：0 成功，1 文件读写错误，2 参数或输入校验失败，3 数值计算失败
"""
import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from pipeline.dataset import (
    SynthSpec,
    holdout_indices,
    load_dataset,
    normalize_views,
    save_dataset,
    save_ground_truth,
    split_labelled,
    synth_multiview,
    take_columns,
    take_truth_columns,
)
from pipeline.errors import NumericalError, ValidationError
from pipeline.evaluation import format_metrics_tsv, per_class_ap
from pipeline.inference import EncodeConfig, binarize, encode_batch, predict_batch, predict_ls, train_ls_head
from pipeline.model_store import load_model, save_model
from pipeline.solver import TRACE_COLUMNS, Hyperparams, fit
from utils.config_loader import load_ini
from utils.defaults import MANIFOLDS, NORMALIZE_METHODS, REGULARIZER_KINDS
from utils.log_setup import setup_logging
from utils.matrix_io import NUMBER_FORMAT, ensure_parent_dir, read_matrix, write_matrix

logger = logging.getLogger("cli")


def _override(obj, **values):
    """用命令行中显式给出的参数覆盖配置值"""
    return replace(obj, **{k: v for k, v in values.items() if v is not None})


def _stem(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root


def _load_normalized(path: str, method: str):
    return normalize_views(load_dataset(path), method)


def cmd_synth(args, cfg) -> None:
    spec = SynthSpec.from_config(cfg, seed=args.seed)
    spec = _override(spec, views=args.views, n_classes=args.classes, n_samples=args.n,
                     n_atoms_true=args.atoms_true, sparsity=args.sparsity, noise_sigma=args.noise,
                     manifold=args.manifold)
    spec.dims = (args.dim if args.dim is not None else cfg["synth_dim"],) * spec.views
    if args.test_n:
        spec.n_samples += args.test_n
    data, truth = synth_multiview(spec)

    truth_path = args.truth or _stem(args.out) + ".truth"
    if args.test_n:
        train_idx, test_idx = holdout_indices(data.total_count, args.test_n, seed=args.seed)
        test_path = _stem(args.out) + ".test.mvds"
        save_dataset(take_columns(data, test_idx, test_idx.size, data.Y[:, test_idx]), test_path)
        logger.info(f"测试集已写入: {test_path}")
        truth = take_truth_columns(truth, train_idx)
        data = take_columns(data, train_idx, train_idx.size, data.Y[:, train_idx])
    save_dataset(data, args.out)
    save_ground_truth(truth, truth_path)
    logger.info(f"数据集已写入: {args.out}，真实参数: {truth_path}")


def _write_trace(path: str, trace) -> None:
    ensure_parent_dir(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(TRACE_COLUMNS) + "\n")
        for i, row in enumerate(trace):
            fh.write("\t".join([str(i)] + [NUMBER_FORMAT % x for x in row.as_row()]) + "\n")


def cmd_train(args, cfg) -> None:
    hp = _override(Hyperparams.from_config(cfg), gamma1=args.gamma1, gamma2=args.gamma2, gamma3=args.gamma3,
                   r=args.r, n_atoms=args.atoms, neighbors=args.neighbors, tangent_dim=args.tangent_dim,
                   regularizer=args.regularizer, outer_max_iters=args.outer_iters,
                   inner_max_iters=args.inner_iters, workers=args.workers)
    if args.exclude_label_view:
        hp.include_label_view = False
    if args.unsupervised:
        hp.supervised = False
    data = _load_normalized(args.data, args.normalize or cfg["data_normalize"])
    if args.labelled_fraction is not None:
        data = split_labelled(data, args.labelled_fraction, seed=args.seed)

    result = fit(data, hp, seed=args.seed)
    save_model(result.state, args.out)
    trace_path = args.trace or _stem(args.out) + ".trace.tsv"
    _write_trace(trace_path, result.trace)
    logger.info(f"目标函数轨迹已写入: {trace_path}")
    if args.ls_head:
        head = train_ls_head(result.state.W_L, data.Y, cfg["inference_ls_ridge"])
        write_matrix(args.ls_head, "ls_head", head)
        logger.info(f"最小二乘分类头已写入: {args.ls_head}")


def _encode_config(args, cfg) -> EncodeConfig:
    return _override(EncodeConfig.from_config(cfg), gamma1_infer=args.gamma1_infer, max_iters=args.max_iters,
                     tol=args.tol)


def _encode_file(args, cfg):
    model = load_model(args.model)
    data = _load_normalized(args.data, args.normalize or cfg["data_normalize"])
    codes = encode_batch([view.values for view in data.views], model.feature_dictionaries,
                         _encode_config(args, cfg), workers=args.workers or 1)
    return model, codes


def cmd_encode(args, cfg) -> None:
    _, codes = _encode_file(args, cfg)
    write_matrix(args.out, "codes", codes.T)
    logger.info(f"编码已写入: {args.out}")


def cmd_predict(args, cfg) -> None:
    model, codes = _encode_file(args, cfg)
    if args.head == "ls":
        if not args.ls_head:
            raise ValidationError("--head ls needs --ls-head PATH")
        scores = predict_ls(read_matrix(args.ls_head, "ls_head"), codes)
    else:
        if model.hyperparams is not None and not model.hyperparams.supervised:
            raise ValidationError("model was trained without the label view; use --head ls")
        scores = predict_batch(codes, model.label_dictionary)
    if args.binarize:
        threshold = args.threshold if args.threshold is not None else cfg["inference_threshold"]
        write_matrix(args.out, "labels", binarize(scores, threshold).T)
    else:
        write_matrix(args.out, "scores", scores.T)
    logger.info(f"预测结果已写入: {args.out}")


def cmd_eval(args, cfg) -> None:
    scores = read_matrix(args.scores, "scores").T
    data = load_dataset(args.data)
    if scores.shape != (data.n_classes, data.total_count):
        raise ValidationError(
            f"dimension mismatch: scores are {scores.shape[1]}×{scores.shape[0]}, "
            f"dataset has N={data.total_count}, Pc={data.n_classes}")
    if data.labelled_count < data.total_count:
        logger.warning(f"只评估已标注的前 {data.labelled_count} 个样本")
    table = format_metrics_tsv(per_class_ap(scores[:, :data.labelled_count], data.Y))
    if args.out:
        ensure_parent_dir(args.out)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
        logger.info(f"评估结果已写入: {args.out}")
    else:
        sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhdsc", description="multiview Hessian discriminative sparse coding")
    parser.add_argument("--config", help="INI 配置文件路径（默认取 MHDSC_INI 或项目根目录的 config.ini）")
    parser.add_argument("--log-level", help="DEBUG / INFO / WARNING / ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="生成多视图合成数据集")
    p.add_argument("--views", type=int)
    p.add_argument("--dim", type=int, help="每个视图的特征维度")
    p.add_argument("--classes", type=int)
    p.add_argument("--n", type=int, help="训练样本数")
    p.add_argument("--atoms-true", type=int)
    p.add_argument("--sparsity", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--manifold", choices=MANIFOLDS)
    p.add_argument("--test-n", type=int, default=0, help="额外生成的测试样本数（写入 <out>.test.mvds）")
    p.add_argument("--truth", help="真实参数输出路径（默认 <out>.truth）")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="交替优化训练模型")
    p.add_argument("--data", required=True)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--gamma3", type=float)
    p.add_argument("--r", type=float, help="视图权重指数 r > 1（默认 5）")
    p.add_argument("--atoms", type=int)
    p.add_argument("--neighbors", type=int, help="近邻数（默认 10；大规模数据可取 100）")
    p.add_argument("--tangent-dim", type=int)
    p.add_argument("--regularizer", choices=REGULARIZER_KINDS)
    p.add_argument("--exclude-label-view", action="store_true", help="流形项不包含标签视图")
    p.add_argument("--unsupervised", action="store_true", help="不重构标签视图（mSC），预测需用 --head ls")
    p.add_argument("--labelled-fraction", type=float)
    p.add_argument("--outer-iters", type=int)
    p.add_argument("--inner-iters", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--normalize", choices=NORMALIZE_METHODS)
    p.add_argument("--trace", help="目标函数轨迹 TSV（默认 <out>.trace.tsv）")
    p.add_argument("--ls-head", help="同时训练最小二乘分类头并写入该路径")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    for name, func, text in (("encode", cmd_encode, "对数据集编码"), ("predict", cmd_predict, "预测类别分数")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--gamma1-infer", type=float)
        p.add_argument("--max-iters", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--workers", type=int)
        p.add_argument("--normalize", choices=NORMALIZE_METHODS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        if name == "predict":
            p.add_argument("--head", choices=("inference", "ls"), default="inference")
            p.add_argument("--ls-head", help="train --ls-head 写出的分类头")
            p.add_argument("--binarize", action="store_true", help="输出 0/1 标签而不是分数")
            p.add_argument("--threshold", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="计算逐类 AP 与 mAP")
    p.add_argument("--scores", required=True)
    p.add_argument("--data", required=True, help="提供真实标签的数据集文件")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level or "INFO")
    try:
        cfg = load_ini(args.config)
        if not args.log_level:
            setup_logging(cfg["logging_level"])
        args.func(args, cfg)
    except NumericalError as e:
        logger.error(f"数值计算失败: {e}")
        return 3
    except ValueError as e:
        logger.error(f"参数或输入错误: {e}")
        return 2
    except OSError as e:
        logger.error(f"文件读写失败: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
