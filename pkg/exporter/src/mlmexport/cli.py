"""Command line wrapper: ``mlmexport export --data F --template-file F
--model NAME --out F``. Exit code 2 on any configuration or data error."""

import argparse
import sys

from mlmexport.export import ExportError, export_split


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlmexport", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    e = sub.add_parser("export", help="export one dataset split to an embedding store")
    e.add_argument("--data", required=True, help="dataset file in the #### grammar")
    e.add_argument("--template-file", required=True, dest="template_file")
    e.add_argument("--model", required=True, help="pretrained model name or directory")
    e.add_argument("--out", required=True, help="output store path")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = export_split(args.data, args.template_file, args.model, args.out)
    except (ExportError, FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"exported {len(report.exported)} sentences, skipped {len(report.skipped)}")
    print(f"wrote {args.out} and {args.out}.report.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
