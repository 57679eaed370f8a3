from pathlib import Path
from dotenv import load_dotenv
import argparse
import sys

from .scenario.parser import ScenarioError, dump_scenario, parse_scenario
from .scenario.runner import canonical_hash, resolve_settings, run_experiments, summarize
from . import log
from .log import *

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog='jointail', description='Joint tail asymptotics laboratory')
    p.add_argument('-v', '--verbose', action='count', default=0)
    p.add_argument('-q', '--quiet', action='count', default=0)
    sub = p.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run every experiment of a scenario')
    run.add_argument('scenario', type=Path)
    run.add_argument('--seed', type=int)
    run.add_argument('--samples', type=int)
    run.add_argument('--threads', type=int)
    run.add_argument('--out')

    check = sub.add_parser('check', help='parse and validate a scenario')
    check.add_argument('scenario', type=Path)
    check.add_argument('--canonical', action='store_true', help='print the canonical scenario text')

    report = sub.add_parser('report', help='rebuild summary.json of a result directory')
    report.add_argument('directory', type=Path)
    return p

def _load(path: Path):
    return parse_scenario(path.read_text(encoding='utf-8'))

def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = _parser().parse_args(argv)
    log.setup(args.verbose - args.quiet)

    try:
        if args.command == 'check':
            sf = _load(args.scenario)
            info(f'{args.scenario}: valid, {len(sf.experiments)} experiments')
            if args.canonical:
                sys.stdout.write(dump_scenario(sf))
            return 0
        if args.command == 'report':
            return summarize(args.directory)
        sf = _load(args.scenario)
        settings = resolve_settings(sf, seed=args.seed, samples=args.samples, threads=args.threads, out=args.out)
        info(f'{args.scenario}: seed {settings.seed}, N {settings.n_samples}, {settings.threads} threads, '
             f'scenario {canonical_hash(sf, settings)[:12]}')
        return run_experiments(sf, settings)
    except ScenarioError as e:
        error(str(e))
        return 1
    except (OSError, ValueError) as e:
        error(f'{type(e).__name__}: {e}')
        return 1

if __name__ == '__main__':
    sys.exit(main())
