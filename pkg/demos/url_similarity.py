"""
Scoring links against a start URL
=================================

A focused crawl only follows links that look like the page it started
from.  Here we score a few candidate links and see which ones clear the
default 0.25 admission threshold.
"""

from serpmine import parse_url_fields, sim_url

start = parse_url_fields("https://www.bluetooth.org/tpg/listings.cfm")
print("start fields:", start.fields)

candidates = [
    "https://www.bluetooth.org/tpg/listings.cfm?page=2",
    "https://www.bluetooth.org/tpg/QLI_viewQDL.cfm?qid=4711",
    "https://www.bluetooth.org/about/history.html",
    "https://ads.example/promo/2011/offer/item.html",
    "http://cdn.example/x.png",
]

# %%
# Fields are compared position by position, so anything on the same host
# and directory scores high, while foreign hosts only match on the scheme.
for url in candidates:
    score = sim_url(parse_url_fields(url), start)
    verdict = "fetch" if score >= 0.25 else "skip"
    print(f"{score:5.3f}  {verdict:5}  {url}")
