"""Deterministic fixture generators.

The study's assets that cannot be fetched in an offline environment
(the released ~1.1K clarity dataset, the private ESG/non-ESG corpus,
live generative-model responses) are stood in for by generators in this
module. Everything is seeded and reproducible; the clarity fixture is
written in the released dataset's CSV schema so the importer exercises
the same code path a real download would.

Difficulty calibration: a fixed fraction of clarity labels is resampled
uniformly at random, which caps the achievable held-out macro F1 near
the published numbers instead of letting template datasets saturate.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path
from typing import Sequence

from .labels import ClarityLabel, RelevanceLabel
from .zeroshot import PromptTemplate, build_prompt, prompt_digest

# ---------------------------------------------------------------------------
# clarity sentence banks

SUBJECTS = [
    "The Fund", "The Sub-fund", "The Portfolio", "The ETF", "The Trust",
    "The Strategy", "The Master Portfolio", "The Feeder Fund",
    "The Underlying Fund", "The Equity Fund", "The Bond Fund", "The Balanced Fund",
]

SPECIFIC_TEMPLATES = [
    "{subj} excludes companies that derive more than {pct}% of revenue from {industry}.",
    "Companies engaged in the business of {industry} or that own {pct}% or more of a company engaged in this activity are excluded from {subj_l}.",
    "{subj} invests a minimum of {pct}% of net assets in green, social, sustainable, and/or sustainability-linked bonds.",
    "Issuers failing to comply with the {standard} are removed from the investable universe of {subj_l}.",
    "At least {pct}% of {subj_l} is invested in issuers with an ESG rating of {rating} or higher.",
    "{subj} tracks an index that excludes producers of {industry} based on a {pct}% revenue threshold.",
    "Up to {pct}% of {subj_l}'s net assets may be invested in High Social Impact Investments.",
    "{subj} screens out issuers that generate over {pct}% of sales from {industry}.",
    "Securities of companies on the {standard} exclusion list are not eligible for purchase by {subj_l}.",
    "{subj}'s weighted average carbon intensity must remain {pct}% below that of the {index}.",
    "{subj} excludes issuers rated {rating} or lower and those involved in {industry} above a {pct}% revenue share.",
    "{subj} allocates at least {pct}% of assets to securities certified under the {standard}.",
    "{subj} divests within {pct} days from any holding found to violate the {standard}.",
    "No more than {pct}% of {subj_l} may be invested in issuers deriving revenue from {industry}.",
]

AMBIGUOUS_TEMPLATES = [
    "{subj} will seek to avoid investing in companies that have significant and direct involvement in {industry}.",
    "The adviser of {subj_l} may consider {theme} among other factors when selecting investments.",
    "{subj} generally seeks to invest in companies with strong characteristics on {theme}.",
    "ESG risks relating to {theme} are integrated into {subj_l}'s investment process where the manager deems them material.",
    "{subj} will seek to invest in companies with sustainable business models which have a strong consideration for {theme} risks and opportunities.",
    "The adviser evaluates issuers in {region} for {subj_l} using a proprietary ESG rating methodology.",
    "A substantial portion of {subj_l} is expected to consist of leaders on {theme}.",
    "The manager of {subj_l} may exclude issuers with a poor record on {industry} at its discretion.",
    "Material considerations around {theme} are taken into account as part of {subj_l}'s fundamental research.",
    "{subj} favors companies in {region} demonstrating a meaningful commitment to responsible business conduct.",
    "{subj} intends to emphasize issuers that manage {theme} exposures responsibly over time.",
    "Where practicable, {subj_l} aims to tilt toward {region} companies with improving ESG momentum.",
    "{subj} seeks meaningful exposure to {theme} without a fixed allocation target.",
    "In general, {subj_l} avoids issuers judged by the adviser to lag peers in {region} on {theme}.",
]

GENERIC_TEMPLATES = [
    "The ESG scores used in the {index} are calculated by {vendor}.",
    "For {subj_l}, ESG refers to environmental, social, and governance characteristics as defined by {vendor}.",
    "The social pillar factors considered for {subj_l} include workforce, community, product responsibility, and human rights.",
    "{vendor} publishes the methodology of the {index} on its website.",
    "{subj} is an exchange-traded fund that seeks to track the performance of the {index}.",
    "Governance practices described in {subj_l}'s prospectus include management structures, employee relations, and remuneration of staff.",
    "The {index} is rebalanced on a quarterly basis in {month}.",
    "ESG ratings for {subj_l} are provided by {vendor}.",
    "The environmental pillar of the {index} covers emissions, resource use, and innovation.",
    "{subj}'s ESG data is sourced from corporate disclosures published in {region}.",
    "The {index} comprises large- and mid-capitalization issuers across {region}.",
    "{vendor} determines the constituents of the {index} annually in {month}.",
    "Sustainability reports cited by {subj_l} are prepared by issuers in {region}.",
    "The carbon intensity figures for the {index} are reported by {vendor} per million dollars of revenue.",
]

INDUSTRIES = [
    "thermal coal", "tobacco production", "controversial weapons", "civilian firearms",
    "oil sands extraction", "gambling", "alcoholic beverages", "palm oil",
    "nuclear power", "predatory lending",
]
STANDARDS = [
    "UN Global Compact principles", "OECD Guidelines", "Paris Aligned Benchmark criteria",
    "SFDR Article 8 requirements", "ILO core conventions",
]
INDEXES = [
    "S&P SmallCap 600 ESG Index", "MSCI ACWI Select Index", "FTSE4Good US Index",
    "Bloomberg MSCI Green Bond Index", "Russell 1000 ESG Index",
    "MSCI USA Extended ESG Focus Index", "STOXX Global ESG Leaders Index",
    "Nasdaq Clean Edge Green Energy Index", "MSCI EM ESG Screened Index",
    "S&P 500 ESG Index",
]
THEMES = [
    "climate transition", "water stewardship", "biodiversity", "human capital",
    "clean energy", "supply chain ethics", "board diversity", "community impact",
]
VENDORS = ["MSCI ESG Research", "Sustainalytics", "ISS ESG", "Refinitiv", "the Index Provider"]
REGIONS = ["the United States", "Europe", "developed markets", "emerging markets", "Asia-Pacific"]
RATINGS = ["BBB", "BB", "A", "AA"]
PCTS = [5, 10, 15, 20, 25, 30, 50]
MONTHS = ["March", "June", "September", "December"]

#: Real public-prospectus sentences used as fixed evaluation anchors.
ANCHOR_SENTENCES: tuple[tuple[str, ClarityLabel], ...] = (
    (
        "Companies engaged in the business of controversial weapons or that own "
        "25% or more of a company engaged in this activity.",
        ClarityLabel.SPECIFIC,
    ),
    (
        "The Sub-fund invests a minimum of 5% in green, social, sustainable, "
        "and/or sustainability-linked bonds.",
        ClarityLabel.SPECIFIC,
    ),
    (
        "The Fund will seek to avoid investing in companies that have significant "
        "and direct involvement in the manufacturing of alcoholic beverages or gambling.",
        ClarityLabel.AMBIGUOUS,
    ),
    (
        "The Fund will seek to invest in companies with sustainable business models "
        "which have a strong consideration for ESG risks and opportunities.",
        ClarityLabel.AMBIGUOUS,
    ),
    (
        "The ESG Scores used in the S&P SmallCap 600 ESG Index are calculated by "
        "the Index Provider.",
        ClarityLabel.GENERIC,
    ),
    (
        "The social pillar factors include workforce, community, product "
        "responsibility, and human rights.",
        ClarityLabel.GENERIC,
    ),
)

_BANKS = {
    ClarityLabel.SPECIFIC: SPECIFIC_TEMPLATES,
    ClarityLabel.AMBIGUOUS: AMBIGUOUS_TEMPLATES,
    ClarityLabel.GENERIC: GENERIC_TEMPLATES,
}

CLARITY_FIXTURE_SIZE = 1155
CLARITY_NOISE_RATE = 0.15
CLARITY_SEED = 20240901


def _fill(template: str, rng: random.Random) -> str:
    subj = rng.choice(SUBJECTS)
    return template.format(
        subj=subj,
        subj_l=subj[0].lower() + subj[1:],
        pct=rng.choice(PCTS),
        industry=rng.choice(INDUSTRIES),
        standard=rng.choice(STANDARDS),
        index=rng.choice(INDEXES),
        theme=rng.choice(THEMES),
        vendor=rng.choice(VENDORS),
        region=rng.choice(REGIONS),
        rating=rng.choice(RATINGS),
        month=rng.choice(MONTHS),
    )


def _unique_sentence(
    label: ClarityLabel, rng: random.Random, seen: set[str]
) -> str:
    for _ in range(500):
        text = _fill(rng.choice(_BANKS[label]), rng)
        if text not in seen:
            seen.add(text)
            return text
    raise RuntimeError("template space exhausted; widen the banks")


def make_clarity_dataset(
    n: int = CLARITY_FIXTURE_SIZE,
    seed: int = CLARITY_SEED,
    noise: float = CLARITY_NOISE_RATE,
) -> list[tuple[str, ClarityLabel]]:
    """The stand-in clarity dataset: ~40/33/27 class mix with a noise
    fraction of uniformly resampled labels bounding top-line scores."""
    rng = random.Random(seed)
    labels = (
        [ClarityLabel.SPECIFIC] * int(n * 0.40)
        + [ClarityLabel.AMBIGUOUS] * int(n * 0.33)
    )
    labels += [ClarityLabel.GENERIC] * (n - len(labels))
    rng.shuffle(labels)

    seen = {text for text, _ in ANCHOR_SENTENCES}
    items: list[tuple[str, ClarityLabel]] = list(ANCHOR_SENTENCES[: min(len(ANCHOR_SENTENCES), n)])
    for label in labels[len(items):]:
        text = _unique_sentence(label, rng, seen)
        emitted = label
        if rng.random() < noise:
            emitted = rng.choice(list(ClarityLabel))
        items.append((text, emitted))
    return items


def write_clarity_csv(
    items: Sequence[tuple[str, ClarityLabel]], path: str | Path
) -> Path:
    """Write in the released dataset's schema (Text,Label columns)."""
    p = Path(path)
    with p.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["Text", "Label"])
        for text, label in items:
            w.writerow([text, label.value])
    return p


# ---------------------------------------------------------------------------
# relevance corpus (ESG vs boilerplate)

NON_ESG_TEMPLATES = [
    "{subj}'s fiscal year ends on {month} {day}.",
    "{bank} processes redemptions for {subj_l} on any business day.",
    "The minimum initial purchase for {subj_l} is ${amount}.",
    "Purchase orders for {subj_l} received after {hour}:00 p.m. Eastern time are priced at the next day's net asset value.",
    "{bank} serves as custodian of {subj_l}'s assets.",
    "{subj} may lend up to {bps} basis points of its portfolio securities to brokers and dealers.",
    "Total annual operating expenses are {bps} basis points of {subj_l}'s average daily net assets.",
    "The adviser has contractually agreed to waive {bps} basis points of its fee for {subj_l} through {month} {year}.",
    "Dividends from {subj_l}'s net investment income are declared and paid {frequency}.",
    "{subj} is a series of the {trust}.",
    "{subj} invests primarily in {cap}-capitalization equity securities listed in {region}.",
    "Portfolio turnover for {subj_l} was {bps} percent of average net assets last year.",
    "{subj} may invest up to {bps} basis points of assets in repurchase agreements with {bank}.",
    "The board of trustees of the {trust} oversees the management of {subj_l}.",
    "Shares of {subj_l} began trading on the exchange in {month} {year}.",
    "Interest rate changes may affect the value of {subj_l}'s holdings of bonds issued in {region}.",
    "{bank} acts as transfer agent and maintains shareholder account records for {subj_l}.",
    "{subj} values its holdings at fair market prices as of the close of trading in {region}.",
    "As of {month} {day}, {subj_l} held approximately ${amount} million in net assets.",
    "A redemption fee of {bps} basis points applies to shares of {subj_l} held fewer than {day} days.",
    "{subj} paid {bank} ${amount} in administrative fees last fiscal year.",
    "Account statements for {subj_l} are mailed {frequency} by {bank}.",
]

BANKS_ = [
    "State Street Bank", "The Bank of New York Mellon", "Northern Trust",
    "JPMorgan Chase Bank", "U.S. Bank", "Brown Brothers Harriman",
    "Citibank", "BNP Paribas",
]
TRUSTS = [
    "Equity Series Trust", "Advisors Investment Trust", "Global Funds Trust",
    "Select Portfolios Trust", "Managed Accounts Trust", "Capital Series Trust",
    "Income Builder Trust", "Allocation Masters Trust",
]
CAPS = ["large", "mid", "small", "all"]
FREQS = ["monthly", "quarterly", "semiannually", "annually"]


def _fill_non_esg(template: str, rng: random.Random) -> str:
    subj = rng.choice(SUBJECTS)
    return template.format(
        subj=subj,
        subj_l=subj[0].lower() + subj[1:],
        month=rng.choice(MONTHS),
        day=rng.randrange(1, 29),
        amount=rng.choice([500, 1000, 2000, 2500, 5000, 10000, 25000, 50000, 100000, 250000]),
        hour=rng.choice([3, 4]),
        bank=rng.choice(BANKS_),
        bps=rng.randrange(10, 200, 5),
        year=rng.choice([2024, 2025, 2026]),
        frequency=rng.choice(FREQS),
        trust=rng.choice(TRUSTS),
        cap=rng.choice(CAPS),
        region=rng.choice(REGIONS),
    )


def make_relevance_corpus(
    n_esg: int = 800, n_non_esg: int = 3200, seed: int = 7041
) -> list[tuple[str, RelevanceLabel]]:
    """Lexicon-separable ESG/non-ESG corpus at roughly 1:4 imbalance.

    ESG sentences come from the clarity banks, rejection-sampled so the
    shipped lexicon matches them (the original corpus was itself built
    by rule-based labeling, so its ESG side is diction-matching by
    construction); non-ESG sentences are administrative boilerplate
    verified free of ESG diction.
    """
    from .relevance import load_lexicon, weak_label_lexicon

    lexicon = load_lexicon()
    rng = random.Random(seed)
    seen: set[str] = set()
    items: list[tuple[str, RelevanceLabel]] = []
    clarity_labels = list(_BANKS)
    for i in range(n_esg):
        label = clarity_labels[i % len(clarity_labels)]
        for _ in range(500):
            text = _unique_sentence(label, rng, seen)
            if weak_label_lexicon(text, lexicon) == RelevanceLabel.ESG:
                break
        else:
            raise RuntimeError("cannot draw a lexicon-matching ESG sentence")
        items.append((text, RelevanceLabel.ESG))
    for _ in range(n_non_esg):
        text = ""
        for _ in range(500):
            text = _fill_non_esg(rng.choice(NON_ESG_TEMPLATES), rng)
            if text not in seen:
                seen.add(text)
                break
        else:
            raise RuntimeError("non-ESG template space exhausted")
        if weak_label_lexicon(text, lexicon) == RelevanceLabel.ESG:
            raise RuntimeError(f"boilerplate template leaked ESG diction: {text!r}")
        items.append((text, RelevanceLabel.NON_ESG))
    rng.shuffle(items)
    return items


# ---------------------------------------------------------------------------
# fixture prospectuses

_RISK_SENTENCES = [
    "The value of the Fund's investments may decline in response to market conditions.",
    "Foreign investments involve currency and political risks.",
    "The Fund is non-diversified and may be more volatile than diversified funds.",
]
_FEE_SENTENCES = [
    "The table below describes the fees and expenses you may pay when buying and holding shares.",
    "Management fees are accrued daily and paid monthly.",
]


def make_prospectus_text(
    doc_seed: int,
    n_esg: int = 6,
    n_boilerplate: int = 3,
) -> str:
    """One plausible summary-prospectus text with a strategy section."""
    rng = random.Random(doc_seed)
    seen: set[str] = set()
    sentences: list[str] = []
    labels = list(_BANKS)
    for i in range(n_esg):
        sentences.append(_unique_sentence(labels[i % len(labels)], rng, seen))
    for _ in range(n_boilerplate):
        sentences.append(_fill_non_esg(rng.choice(NON_ESG_TEMPLATES), rng))
    rng.shuffle(sentences)
    body = " ".join(sentences)
    return (
        f"FUND {doc_seed} SUMMARY PROSPECTUS\n"
        "\n"
        "FEES AND EXPENSES\n"
        f"{' '.join(_FEE_SENTENCES)}\n"
        "\n"
        "PRINCIPAL INVESTMENT STRATEGIES\n"
        f"{body}\n"
        "\n"
        "PRINCIPAL RISKS\n"
        f"{' '.join(_RISK_SENTENCES)}\n"
    )


def write_fixture_corpus(directory: str | Path, n_docs: int = 3, seed: int = 100) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n_docs):
        p = d / f"fund_{seed + i}.txt"
        p.write_text(make_prospectus_text(seed + i), encoding="utf-8")
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# simulated zero-shot transcript

_PHRASINGS = [
    "{label}",
    "{label}.",
    "This sentence is {label_l} because of how the strategy is worded.",
    "Label: {label}",
    "I would classify this as {label_l}.",
]
_ABSTAIN_RESPONSES = [
    "Could be {a} or {b}.",
    "It is hard to say without more context.",
    "Either {a} or {b} seems plausible here.",
]


def simulate_zero_shot_transcript(
    items: Sequence[tuple[str, str, ClarityLabel]],
    template: PromptTemplate,
    path: str | Path,
    seed: int = 99,
    accuracy: float = 0.55,
    abstain_rate: float = 0.08,
) -> Path:
    """Write a replay transcript from a deliberately flawed rater.

    Mimics zero-shot behavior: roughly `accuracy` of responses carry the
    gold label, a slice abstains (multiple or zero label tokens), the
    rest pick a wrong label. items are (sentence_id, text, gold).
    """
    rng = random.Random(seed)
    all_labels = list(ClarityLabel)
    p = Path(path)
    with p.open("w", encoding="utf-8") as f:
        for sentence_id, text, gold in items:
            roll = rng.random()
            if roll < abstain_rate:
                a, b = rng.sample(all_labels, 2)
                response = rng.choice(_ABSTAIN_RESPONSES).format(
                    a=a.value, b=b.value
                )
            else:
                if roll < abstain_rate + accuracy:
                    label = gold
                else:
                    label = rng.choice([l for l in all_labels if l != gold])
                response = rng.choice(_PHRASINGS).format(
                    label=label.value, label_l=label.value.lower()
                )
            f.write(
                json.dumps(
                    {
                        "sentence_id": sentence_id,
                        "prompt_digest": prompt_digest(build_prompt(text, template)),
                        "response": response,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return p
