from __future__ import annotations

import numpy as np
import pytest

from fxreserves.accounting import CurrencySet, Quarter
from fxreserves.io_config import write_cofer, write_market, write_reported, write_reserves
from fxreserves.simulate import make_synthetic_dataset
from fxreserves.state_model import ModelParams

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: "
                            f"{title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def write_synthetic_country(out_dir, seed=1, start=Quarter(2010, 4), end=Quarter(2016, 4),
                            codes=("USD", "EUR", "GBP", "JPY"), extra_config="",
                            n_particles=2000):
    """Write a small synthetic country plus a config file; return (config path, dataset)."""
    cur = CurrencySet(codes)
    rng = np.random.default_rng(seed)
    ds = make_synthetic_dataset(cur, start, end, 50.0, ModelParams(), rng)
    write_reserves(out_dir / "reserves.csv", ds.reserves)
    write_market(out_dir, ds.market)
    write_cofer(out_dir / "cofer.csv", ds.market.quarters, cur, ds.cofer_shares,
                ds.cofer_other)
    has_reports = any(ds.reported.values())
    if has_reports:
        write_reported(out_dir / "reported.csv", ds.reported)
    cfg = out_dir / "config.ini"
    cfg.write_text(
        f"currencies = {', '.join(codes)}\n"
        f"n_particles = {n_particles}\n"
        f"seed = {seed}\n"
        "data.reserves = reserves.csv\n"
        "data.rates = rates.csv\n"
        "data.yields = yields.csv\n"
        "data.equity = equity.csv\n"
        "data.sdr = sdr_daily.csv\n"
        "data.cofer = cofer.csv\n"
        + ("data.reported = reported.csv\n" if has_reports else "") + extra_config)
    return cfg, ds


@pytest.fixture
def country(tmp_path):
    return write_synthetic_country(tmp_path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
