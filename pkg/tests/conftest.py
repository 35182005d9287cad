import shutil
from pathlib import Path

import pytest

from serpmine import FixtureFetcher, Repository, RecordStore, SiteSpec, generate_site, run_wdes, run_wdics
from serpmine.repository import url_to_local_path
from serpmine.synthetic import default_crawl_config, default_extraction_config


def write_fixture(root: Path, pages: dict) -> Path:
    """Lay out ``{url: html}`` the way FixtureFetcher expects."""
    for url, body in pages.items():
        path = root / url_to_local_path(url)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, encoding="utf-8")
    return root


def html_page(*links, title="t"):
    anchors = "\n".join(f'<a href="{href}">{text}</a>' for href, text in links)
    return f"<html><head><title>{title}</title></head><body>\n{anchors}\n</body></html>\n"


def build_pipeline(root: Path, spec: SiteSpec, depth_limit=2, parallel=1):
    site = root / "site"
    truth = generate_site(spec, site)
    repo = Repository(root / "mirror")
    crawl_report = run_wdes(default_crawl_config(depth_limit, max_parallel_fetches=parallel),
                            FixtureFetcher(site), repo)
    repo.finalize()
    config = default_extraction_config()
    store = RecordStore.for_config(root / "store.csv", config)
    integ = run_wdics(repo, config, store)
    return dict(site=site, truth=truth, repo=repo, crawl=crawl_report, store=store,
                integration=integ, config=config)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    return build_pipeline(tmp_path_factory.mktemp("default"), SiteSpec(seed=42))


@pytest.fixture(scope="session")
def conflict_run(tmp_path_factory):
    return build_pipeline(tmp_path_factory.mktemp("conflict"),
                          SiteSpec(seed=42, duplicate_conflict_count=10))


@pytest.fixture
def fresh_site(tmp_path):
    site = tmp_path / "site"
    truth = generate_site(SiteSpec(seed=42), site)
    return site, truth


def copy_tree(src: Path, dst: Path) -> Path:
    shutil.copytree(src, dst)
    return dst


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
