"""
Mirroring a paginated result listing
====================================

Generate a synthetic listing site, crawl it through the fixture fetcher,
and check that the finalized mirror can be browsed without a network.
"""

import tempfile
from pathlib import Path

from serpmine import FixtureFetcher, Repository, SiteSpec, generate_site, run_wdes
from serpmine.synthetic import default_crawl_config

work = Path(tempfile.mkdtemp(prefix="serpmine-demo-"))

# 15 result pages with 10 products each, plus 50 sponsored links elsewhere
truth = generate_site(SiteSpec(seed=42), work / "site")
print(f"planted {len(truth.records)} records under {work / 'site'}")

# %%
# Crawl two levels deep.  Result pages are always stored; other links must
# score at least 0.25 against the start URL.
config = default_crawl_config(depth_limit=2)
repo = Repository(work / "mirror")
report = run_wdes(config, FixtureFetcher(work / "site"), repo)
print(report.to_json())

# %%
# Links are rewritten only after the crawl, once every stored path is known.
repo.finalize()
reached, dangling = repo.offline_walk()
print(f"offline walk reached {len(reached)} files, {len(dangling)} dangling links")

start = repo.get(repo.start_url)
print("open in a browser:", (repo.root / start.path).resolve().as_uri())
