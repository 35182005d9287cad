"""
Integrating records from a mirror
=================================

Extract product records from mirrored detail pages and merge them into a
CSV-backed store.  Ten products appear twice with different spec versions;
their cells end up holding both values.
"""

import tempfile
from pathlib import Path

from serpmine import FixtureFetcher, RecordStore, Repository, SiteSpec, generate_site, run_wdes, run_wdics
from serpmine.synthetic import default_crawl_config, default_extraction_config

work = Path(tempfile.mkdtemp(prefix="serpmine-demo-"))
truth = generate_site(SiteSpec(seed=7, duplicate_conflict_count=10), work / "site")
repo = Repository(work / "mirror")
run_wdes(default_crawl_config(), FixtureFetcher(work / "site"), repo)
repo.finalize()

# %%
# The extraction config says where each attribute lives on a page and which
# links lead to detail pages.
config = default_extraction_config()
print(config.to_text())

store = RecordStore.for_config(work / "products.csv", config)
report = run_wdics(repo, config, store)
print(report.summary())

# %%
# Conflicting duplicates were merged by set union.
for key, attr in truth.conflicts[:3]:
    print(key, attr, sorted(store.get(key).values[attr]))

# %%
# A second pass finds nothing new: identical records are skipped and
# already-merged ones are left unchanged.
print(run_wdics(repo, config, store).summary())

# %%
# Query the store like the CLI's ``query`` subcommand does.
for record in store.query({"Company": "Company-3"})[:5]:
    print({k: sorted(v) for k, v in record.values.items()})
