"""Configuration, trial pipeline, aggregation, CSV, and CLI tests.

The end-to-end goldens are tiny (a few trials at one SNR) so the whole
module stays fast; statistical behaviour is covered by the acceptance
suite, not here.
"""

import dataclasses
import hashlib

import numpy as np
import pytest

from leolink.cli import main
from leolink.harness import (
    CSV_HEADER,
    FIG3_DEFAULT_SNRS,
    FIG3_EVAL_BLOCKS,
    FIG4_EVAL_BLOCKS,
    FIG4_OPERATING_SNR_DB,
    CampaignError,
    ConfigError,
    SystemConfig,
    default_snr_list,
    format_csv,
    parse_config_text,
    run_campaign,
    run_trial,
    trial_rng,
    write_csv,
)
from leolink.metrics import MetricRecord

CFG = SystemConfig().validate()

GOLDEN_FIG2_CSV = (
    "method,snr_db,block,nmse,ser,trials,seed\n"
    "DD-SB,0.0,,6.27305299331690994e-03,,3,12345\n"
    "P-LS,0.0,,6.71768430403898997e-03,,3,12345\n"
)
GOLDEN_FIG2_SHA256 = "a9e59b1b9deb516d3eab0d03c553524d0019c127d373d27188c55057c4cb86de"


# ---------------------------------------------------------------- config

def test_default_config_values():
    assert CFG.m_x == 10 and CFG.m_y == 10 and CFG.k_users == 10
    assert CFG.scs_hz == 960e3
    assert CFG.p == 15 and CFG.d == 15 and CFG.n_blocks == 50
    assert CFG.update_interval == 5
    assert CFG.constellation_order == 16
    assert CFG.master_seed == 12345


@pytest.mark.parametrize("field, value", [
    ("k_users", 0),
    ("k_users", 101),            # exceeds the 10 x 10 array
    ("p", 9),                    # fewer pilots than users
    ("update_interval", 0),
    ("update_interval", 51),
    ("constellation_order", 12),
    ("subcarrier", 4096),
    ("scs_hz", 0.0),
    ("trials", 0),
    ("snr_grid_db", ()),
    ("snr_grid_db", (float("nan"),)),
])
def test_validate_rejects_and_names_field(field, value):
    cfg = dataclasses.replace(SystemConfig(), **{field: value})
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert field in str(exc.value)


def test_config_text_round_trip():
    cfg = dataclasses.replace(SystemConfig(), scs_hz=120e3, trials=7,
                              snr_grid_db=(-2.5, 0.0, 12.0), fixed_paths=False)
    assert parse_config_text(cfg.to_text()) == cfg


def test_parse_empty_text_yields_defaults():
    assert parse_config_text("") == SystemConfig()
    assert parse_config_text("\n  # just a comment\n\n") == SystemConfig()


def test_parse_rejects_unknown_duplicate_and_malformed():
    with pytest.raises(ConfigError, match="line 1.*unknown key"):
        parse_config_text("nonsense = 3")
    with pytest.raises(ConfigError, match="line 3.*duplicate"):
        parse_config_text("trials = 3\n\ntrials = 4")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("trials = 3\njust some words")
    with pytest.raises(ConfigError, match="line 1.*trials"):
        parse_config_text("trials = lots")
    with pytest.raises(ConfigError, match="fixed_paths"):
        parse_config_text("fixed_paths = maybe")


def test_parse_accepts_comments_and_booleans():
    cfg = parse_config_text("trials = 9   # inline comment\nfixed_paths = off\n")
    assert cfg.trials == 9
    assert cfg.fixed_paths is False


# ---------------------------------------------------------------- RNG

def test_trial_rng_reproducible_and_distinct():
    base = trial_rng(1, "fig2", 0.0, 0).integers(0, 2**32, 8)
    assert np.array_equal(base, trial_rng(1, "fig2", 0.0, 0).integers(0, 2**32, 8))
    for other in [trial_rng(1, "fig2", 0.0, 1),
                  trial_rng(1, "fig3", 0.0, 0),
                  trial_rng(1, "fig2", 5.0, 0),
                  trial_rng(1, "fig2", float("inf"), 0),
                  trial_rng(2, "fig2", 0.0, 0)]:
        assert not np.array_equal(base, other.integers(0, 2**32, 8))


# ---------------------------------------------------------------- trials

def test_run_trial_fig2_keys_and_determinism():
    a = run_trial(CFG, 0, 0.0, "fig2")
    b = run_trial(CFG, 0, 0.0, "fig2")
    assert set(a.nmse) == {("P-LS", None), ("DD-SB", None)}
    assert a.ser == {}
    assert a.nmse == b.nmse


def test_run_trial_fig3_keys():
    out = run_trial(CFG, 0, 10.0, "fig3")
    methods = {m for m, _ in out.nmse}
    blocks = {b for _, b in out.nmse}
    assert methods == {"MDD-SB", "P-bound", "KD-MDD-SB"}
    assert blocks == set(FIG3_EVAL_BLOCKS)
    assert len(out.nmse) == 3 * len(FIG3_EVAL_BLOCKS)
    assert out.ser == {}


def test_run_trial_fig4_keys():
    out = run_trial(CFG, 0, 17.0, "fig4")
    methods = {m for m, _ in out.ser}
    blocks = {b for _, b in out.ser}
    assert methods == {"MDD-SB", "P-bound", "GA"}
    assert blocks == set(FIG4_EVAL_BLOCKS)
    assert out.nmse == {}


def test_run_trial_unknown_experiment():
    with pytest.raises(ValueError):
        run_trial(CFG, 0, 0.0, "fig9")


# ---------------------------------------------------------------- campaigns

def test_campaign_single_trial_matches_run_trial():
    cfg = dataclasses.replace(CFG, trials=1)
    records = run_campaign(cfg, "fig2", snr_list=[5.0])
    trial = run_trial(cfg, 0, 5.0, "fig2")
    by_method = {r.method: r for r in records}
    assert by_method["P-LS"].nmse == trial.nmse[("P-LS", None)]
    assert by_method["DD-SB"].nmse == trial.nmse[("DD-SB", None)]
    assert all(r.trials == 1 and r.seed == cfg.master_seed for r in records)


def test_default_snr_lists():
    assert default_snr_list(CFG, "fig2") == [float(s) for s in CFG.snr_grid_db]
    assert default_snr_list(CFG, "fig3") == list(FIG3_DEFAULT_SNRS)
    assert default_snr_list(CFG, "fig4") == [FIG4_OPERATING_SNR_DB]


def test_campaign_default_grid_and_sorting():
    cfg = dataclasses.replace(CFG, trials=2)
    records = run_campaign(cfg, "fig2")
    assert len(records) == 2 * len(cfg.snr_grid_db)
    keys = [(r.method, r.snr_db) for r in records]
    assert keys == sorted(keys)
    assert {r.method for r in records} == {"P-LS", "DD-SB"}


def test_campaign_golden_csv():
    cfg = dataclasses.replace(CFG, trials=3)
    text = format_csv(run_campaign(cfg, "fig2", snr_list=[0.0]))
    assert text == GOLDEN_FIG2_CSV
    assert hashlib.sha256(text.encode()).hexdigest() == GOLDEN_FIG2_SHA256


def test_campaign_worker_count_does_not_change_output():
    cfg = dataclasses.replace(CFG, trials=3)
    serial = format_csv(run_campaign(cfg, "fig2", snr_list=[0.0], workers=1))
    parallel = format_csv(run_campaign(cfg, "fig2", snr_list=[0.0], workers=2))
    assert serial == parallel == GOLDEN_FIG2_CSV


def test_campaign_rejects_degenerate_scenarios():
    # a 10 x 1 line array cannot separate 10 users; most draws are rejected
    cfg = dataclasses.replace(CFG, m_x=10, m_y=1, trials=20).validate()
    with pytest.raises(CampaignError, match="skipped"):
        run_campaign(cfg, "fig2", snr_list=[10.0])


def test_campaign_argument_errors():
    with pytest.raises(ConfigError):
        run_campaign(CFG, "fig9", snr_list=[0.0])
    with pytest.raises(ConfigError):
        run_campaign(CFG, "fig2", snr_list=[])
    with pytest.raises(ConfigError):
        run_campaign(CFG, "fig2", snr_list=[0.0], trials=0)


# ---------------------------------------------------------------- CSV

def test_format_csv_empty_and_optional_fields():
    assert format_csv([]) == CSV_HEADER + "\n"
    rec = MetricRecord(method="GA", snr_db=17.0, block=20, nmse=None, ser=0.25,
                       trials=4, seed=99)
    text = format_csv([rec])
    assert text == CSV_HEADER + "\nGA,17.0,20,,2.50000000000000000e-01,4,99\n"


def test_write_csv_round_trip(tmp_path):
    rec = MetricRecord(method="P-LS", snr_db=-5.0, block=None, nmse=0.5, ser=None,
                       trials=2, seed=1)
    path = tmp_path / "out.csv"
    write_csv([rec], str(path))
    assert path.read_text(encoding="utf-8") == format_csv([rec])


# ---------------------------------------------------------------- CLI

def test_cli_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "fig2.csv"
    code = main(["simulate", "fig2", "--trials", "1", "--snr-list", "0",
                 "--output", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    assert "wrote 2 records" in capsys.readouterr().out


def test_cli_config_file_and_overrides(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("trials = 5\nmaster_seed = 7\n", encoding="utf-8")
    out = tmp_path / "out.csv"
    code = main(["simulate", "fig2", "--config", str(cfg_path), "--trials", "1",
                 "--snr-list", "0", "--output", str(out)])
    assert code == 0
    # the --trials override wins; the seed comes from the file
    last = out.read_text(encoding="utf-8").splitlines()[-1]
    assert last.endswith(",1,7")


def test_cli_error_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("trials = -3\n", encoding="utf-8")
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "fig2", "--config", str(bad_cfg), "--output", out]) == 1
    assert main(["simulate", "fig2", "--config", str(tmp_path / "missing.cfg"),
                 "--output", out]) == 1
    assert main(["simulate", "fig2", "--snr-list", "0,abc", "--output", out]) == 1
    capsys.readouterr()

    degenerate = tmp_path / "line.cfg"
    degenerate.write_text("m_x = 10\nm_y = 1\ntrials = 20\n", encoding="utf-8")
    assert main(["simulate", "fig2", "--config", str(degenerate), "--snr-list", "10",
                 "--output", out]) == 2
    assert "campaign error" in capsys.readouterr().err


def test_cli_print_defaults(capsys):
    assert main(["print-defaults"]) == 0
    text = capsys.readouterr().out
    assert parse_config_text(text) == SystemConfig()


def test_cli_dump_channel(tmp_path):
    out = tmp_path / "dump.csv"
    assert main(["dump-channel", "--output", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# steering matrix, 10 x 100")
    assert any(line.startswith("# reference channel, 10 x 765") for line in lines)
