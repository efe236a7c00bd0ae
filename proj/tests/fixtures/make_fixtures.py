#!/usr/bin/env python3
"""Regenerates the offline paper universe under tests/fixtures/universe.

Three seeds live in the universe:
  gpt3   2020, 146 references. 18 retrievable references predate 2020
         (3 from 2017, 5 from 2018, 10 from 2019), 20 are from 2020, 8 have
         no year, 100 cannot be retrieved. The 18 older ones form the graph:
         55 explicit edges, 31 parallel edges and 5 sources once the planted
         mutual listings and the planted 3-cycle are broken.
  seedb  2019, 40 references, randomised listings, fuzzy bibliography titles
         and an unmapped section heading.
  seedc  2021, 8 references plus older references-of-references; its idea has
         to be extracted from its TEI.

Run from the repository root: python3 tests/fixtures/make_fixtures.py
"""

import json
import random
from pathlib import Path
from xml.sax.saxutils import escape

ROOT = Path(__file__).resolve().parent / "universe"

WORDS = """attention transformer language model pretraining corpus token sequence
representation embedding gradient optimizer scaling parameter benchmark dataset
evaluation downstream finetuning zero shot few shot prompt context window
decoder encoder layer residual normalization dropout regularization objective
likelihood perplexity generalization robustness efficiency compute budget
curriculum augmentation alignment supervision contrastive retrieval memory
reasoning arithmetic translation summarization question answering reading
comprehension inference entailment sentiment classification generation
sampling decoding beam temperature nucleus diversity coherence factuality
hallucination bias fairness toxicity calibration uncertainty ensemble
distillation pruning quantization sparsity mixture expert routing throughput
latency hardware accelerator parallelism pipeline sharding checkpoint
initialization warmup schedule learning rate batch size convergence stability
variance estimator baseline ablation analysis hypothesis experiment protocol
metric accuracy precision recall human judgment annotation crowdsourcing
instruction demonstration task transfer adaptation domain shift
multilingual tokenizer vocabulary subword character byte positional encoding
recurrent convolution feedforward activation softmax logits loss function
theory bound capacity overparameterization interpolation memorization
emergence capability frontier limitation societal impact""".split()

VENUES = ["NeurIPS", "ICML", "ICLR", "ACL", "EMNLP", "NAACL", "arXiv", "JMLR", "TACL", "CVPR"]
FIRST = ["Alec", "Ilya", "Jared", "Tom", "Dario", "Sam", "Rewon", "Noam", "Ashish", "Jakob",
         "Llion", "Aidan", "Lukasz", "Niki", "Jacob", "Kenton", "Kristina", "Ming-Wei", "Colin",
         "Adam", "Katherine", "Sharan", "Michael", "Yanqi", "Wei", "Peter", "Yinhan", "Myle"]
LAST = ["Radford", "Sutskever", "Kaplan", "Brown", "Amodei", "McCandlish", "Child", "Shazeer",
        "Vaswani", "Uszkoreit", "Jones", "Gomez", "Kaiser", "Parmar", "Devlin", "Lee",
        "Toutanova", "Chang", "Raffel", "Roberts", "Narang", "Matena", "Zhou", "Li", "Liu", "Ott"]


def sentence(rng, n):
    words = [rng.choice(WORDS) for _ in range(n)]
    return " ".join(words).capitalize() + "."


def paragraph(rng, words_total, sentence_len=(9, 16)):
    out, count = [], 0
    while count < words_total:
        n = min(rng.randint(*sentence_len), words_total - count)
        out.append(sentence(rng, max(n, 1)))
        count += max(n, 1)
    return " ".join(out)


def title(rng, n=None):
    n = n or rng.randint(4, 8)
    return " ".join(w.capitalize() for w in (rng.choice(WORDS) for _ in range(n)))


def authors(rng, n=None):
    n = n or rng.randint(1, 9)
    return [f"{rng.choice(FIRST)} {rng.choice(LAST)}" for _ in range(n)]


def idea(rng, words_per_field):
    return {
        "Problem": paragraph(rng, words_per_field),
        "Existing Methods": paragraph(rng, words_per_field),
        "Motivation": paragraph(rng, words_per_field),
        "Proposed Method": paragraph(rng, words_per_field),
        "Experiment Plan": paragraph(rng, words_per_field),
    }


def record(pid, t, year, venue, auth, abstract, refs, idea_obj=None, citations=0):
    return {
        "id": pid,
        "title": t,
        "year": year,
        "venue": venue,
        "authors": auth,
        "abstract": abstract,
        "citation_count": citations,
        "is_influential": False,
        "contexts": [],
        "reference_ids": refs,
        "idea": idea_obj,
    }


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# --- TEI -------------------------------------------------------------------

def tei_document(doc_title, sections, bibl, annex=None):
    """sections: list of (heading, [paragraph pieces]); a piece is either text
    or ("cite", key)."""

    def body(pieces):
        out = []
        for piece in pieces:
            if isinstance(piece, tuple):
                out.append(f'<ref type="bibr" target="#{piece[1]}">[{piece[1][1:]}]</ref>')
            else:
                out.append(escape(piece))
        return " ".join(out)

    divs = []
    for n, (heading, pieces) in enumerate(sections, 1):
        divs.append(f'<div xmlns="http://www.tei-c.org/ns/1.0"><head n="{n}">{escape(heading)}</head>'
                    f"<p>{body(pieces)}</p></div>")
    annex_xml = ""
    if annex:
        heading, pieces = annex
        annex_xml = (f'<div type="annex"><div xmlns="http://www.tei-c.org/ns/1.0"><head>{escape(heading)}</head>'
                     f"<p>{body(pieces)}</p></div></div>")
    entries = []
    for key, t, year, auth, venue in bibl:
        people = "".join(
            f"<author><persName><forename type=\"first\">{escape(a.split()[0])}</forename>"
            f"<surname>{escape(a.split()[-1])}</surname></persName></author>" for a in auth)
        date = f'<date type="published" when="{year}" />' if year else ""
        entries.append(f'<biblStruct xml:id="{key}"><analytic><title level="a" type="main">{escape(t)}</title>'
                       f"{people}</analytic><monogr><title level=\"j\">{escape(venue)}</title>"
                       f"<imprint>{date}</imprint></monogr></biblStruct>")
    return ("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            "<TEI xml:space=\"preserve\" xmlns=\"http://www.tei-c.org/ns/1.0\">\n"
            f"<teiHeader><fileDesc><titleStmt><title level=\"a\" type=\"main\">{escape(doc_title)}</title>"
            "</titleStmt></fileDesc></teiHeader>\n"
            "<text xml:lang=\"en\"><body>\n" + "\n".join(divs) + "\n</body><back>" + annex_xml +
            "<div type=\"references\"><listBibl>\n" + "\n".join(entries) + "\n</listBibl></div></back></text>\n</TEI>\n")


def spread_citations(rng, counts, section_names, filler_words=14):
    """counts: key -> number of anchors, key -> allowed section indices.
    Returns per-section piece lists."""
    pieces = {i: [] for i in range(len(section_names))}
    for key, (n, allowed) in sorted(counts.items()):
        for j in range(n):
            pieces[allowed[j % len(allowed)]].append(("cite", key))
    out = []
    for i, _ in enumerate(section_names):
        seq = []
        for cite in pieces[i]:
            seq.append(sentence(rng, rng.randint(6, filler_words)))
            seq.append(cite)
        seq.append(sentence(rng, rng.randint(6, filler_words)))
        out.append(seq)
    return out


# --- GPT-3 style seed --------------------------------------------------------

# Intended predecessor lists after cycle breaking (names, listing -> listed).
GPT3_PARALLEL = {
    "A2": ["A1"], "A3": ["A1"],
    "B3": ["B1", "B2"], "B4": ["B1", "B2", "B3"], "B5": ["B1", "B2", "B3", "B4"],
    "C3": ["C1", "C2"], "C4": ["C1", "C2", "C3"], "C5": ["C2", "C3", "C4"], "C6": ["C4", "C5"],
    "C7": ["C5", "C6"], "C8": ["C5", "C6", "C7"], "C9": ["C6", "C7", "C8"], "C10": ["C8", "C9"],
}
A = ["A1", "A2", "A3"]
B = ["B1", "B2", "B3", "B4", "B5"]
GPT3_EXPLICIT = {
    "B3": A, "B4": A, "B5": A,
    "C3": A + B[:3], "C4": A + B[1:4], "C5": A + B[2:5], "C6": A + B[:3],
    "C7": A + B[1:4], "C8": A + B[2:5], "C9": A + B[:2], "C10": A + B[3:5],
}
# Listings that create cycles and must be dropped: two mutual pairs and a
# 3-cycle C7 -> C8 -> C10 -> C7 (C7 listing C10 closes it).
GPT3_CYCLE_LISTINGS = {"A1": ["A2"], "B1": ["B3"], "C7": ["C10"]}
GPT3_ABSTRACT_WORDS = 32
GPT3_IDEA_WORDS = 15
GPT3_ORDER = A + B + [f"C{i}" for i in range(1, 11)]
GPT3_YEAR = {**{n: 2017 for n in A}, **{n: 2018 for n in B}, **{f"C{i}": 2019 for i in range(1, 11)}}


def oracle_edges(lists, years, cite):
    """Independent recount: break mutual pairs, then any remaining cycle, and
    count classes over what is left. Edge p -> n means n lists p."""
    lists = {k: list(v) for k, v in lists.items()}
    nodes = sorted(lists)

    def strength(n):
        return (cite[n], [-ord(c) for c in n])  # weaker: lower cite, then larger id

    for u in nodes:
        for v in nodes:
            if u < v and v in lists[u] and u in lists[v]:
                weak, strong = (u, v) if strength(u) < strength(v) else (v, u)
                lists[strong].remove(weak)

    def out_edges(p):
        return [n for n in nodes if p in lists[n]]

    def find_cycle():
        colour = {n: 0 for n in nodes}
        stack = []

        def visit(p):
            colour[p] = 1
            stack.append(p)
            for n in out_edges(p):
                if colour[n] == 1:
                    return stack[stack.index(n):]
                if colour[n] == 0:
                    found = visit(n)
                    if found:
                        return found
            colour[p] = 2
            stack.pop()
            return None

        for n in nodes:
            if colour[n] == 0:
                found = visit(n)
                if found:
                    return found
        return None

    while (cycle := find_cycle()) is not None:
        weak_at = min(range(len(cycle)), key=lambda i: strength(cycle[i]))
        weak, nxt = cycle[weak_at], cycle[(weak_at + 1) % len(cycle)]
        lists[nxt].remove(weak)

    explicit = parallel = sources = 0
    for n in nodes:
        if not lists[n]:
            sources += 1
        for p in lists[n]:
            if years[p] < years[n]:
                explicit += 1
            elif years[p] == years[n]:
                parallel += 1
    return explicit, parallel, sources


def make_gpt3(rng):
    names = {n: f"gpt3-r{n.lower()}" for n in GPT3_ORDER}
    ids = {v: k for k, v in names.items()}
    cite = {n: 40 - 2 * i for i, n in enumerate(GPT3_ORDER)}  # 40 .. 6, strictly decreasing

    lists = {}
    for n in GPT3_ORDER:
        lists[n] = GPT3_EXPLICIT.get(n, []) + GPT3_PARALLEL.get(n, []) + GPT3_CYCLE_LISTINGS.get(n, [])
    expected = oracle_edges(lists, GPT3_YEAR, cite)
    assert expected == (55, 31, 5), expected

    recent = [f"gpt3-y2020-{i:02d}" for i in range(1, 21)]
    undated = [f"gpt3-nodate-{i:02d}" for i in range(1, 9)]
    missing = [f"gpt3-missing-{i:03d}" for i in range(1, 101)]
    refs = [names[n] for n in GPT3_ORDER] + recent + undated + missing
    rng.shuffle(refs)

    seed_title = "Language Models Are Few Shot Learners At Scale"
    seed = record("gpt3", seed_title, 2020, "NeurIPS", authors(rng, 31), paragraph(rng, 180), refs,
                  idea(rng, 60), 12000)
    dump(ROOT / "records" / "gpt3.json", seed)

    infl = {"A1", "B1", "C1", "C4", "C9"}
    links = []
    bibl = []
    key_of = {}
    for i, pid in enumerate(sorted(refs)):
        key_of[pid] = f"b{i}"

    for n in GPT3_ORDER:
        pid = names[n]
        t = title(rng)
        rec = record(pid, t, GPT3_YEAR[n], rng.choice(VENUES), authors(rng), paragraph(rng, GPT3_ABSTRACT_WORDS),
                     [names[m] for m in lists[n]], idea(rng, GPT3_IDEA_WORDS), rng.randint(50, 5000))
        dump(ROOT / "records" / f"{pid}.json", rec)
        links.append({"target": pid, "is_influential": n in infl, "contexts": [sentence(rng, 10)]})
        bibl.append((key_of[pid], t, GPT3_YEAR[n], rec["authors"], rec["venue"]))
    for i, pid in enumerate(recent):
        t = title(rng)
        rec = record(pid, t, 2020, rng.choice(VENUES), authors(rng), paragraph(rng, 60), [], None, rng.randint(0, 50))
        dump(ROOT / "records" / f"{pid}.json", rec)
        links.append({"target": pid, "is_influential": False, "contexts": []})
        bibl.append((key_of[pid], t, 2020, rec["authors"], rec["venue"]))
    for pid in undated:
        t = title(rng)
        rec = record(pid, t, None, "", authors(rng), "", [], None, 0)
        dump(ROOT / "records" / f"{pid}.json", rec)
        bibl.append((key_of[pid], t, None, rec["authors"], ""))
    for pid in missing:
        bibl.append((key_of[pid], title(rng), rng.choice([2015, 2016, 2018, 2019, 2020]), authors(rng), "arXiv"))
    bibl.sort(key=lambda b: int(b[0][1:]))
    dump(ROOT / "links" / "gpt3.json", links)

    section_names = ["Introduction", "Related Work", "Approach", "Results", "Limitations"]
    allowed = {
        "A": [2, 0, 3], "B": [2, 3, 1], "C": [3, 2, 0, 4],
    }
    counts = {}
    for n in GPT3_ORDER:
        counts[key_of[names[n]]] = (cite[n], allowed[n[0]])
    for pid in recent[:4]:  # the four 2020 papers that make the post-selection top 22
        counts[key_of[pid]] = (1, [1])
    for pid in missing[:30]:
        counts[key_of[pid]] = (1, [0])
    secs = spread_citations(rng, counts, section_names)
    annex = ("Appendix A Additional Details", [sentence(rng, 12), ("cite", key_of[names["C2"]]), sentence(rng, 9)])
    doc = tei_document(seed_title, list(zip(section_names, secs)), bibl, annex)
    (ROOT / "tei").mkdir(parents=True, exist_ok=True)
    (ROOT / "tei" / "gpt3.tei.xml").write_text(doc, encoding="utf-8")
    return ids


# --- seed B: randomised 2019 seed -------------------------------------------

def make_seedb(rng):
    n_ok, n_missing = 26, 14
    refs = [f"seedb-r{i:02d}" for i in range(n_ok)]
    years = {pid: rng.choice([2012, 2014, 2015, 2016, 2017, 2017, 2018, 2018, 2019]) for pid in refs}
    outside = [f"seedb-x{i:02d}" for i in range(6)]  # references of references only
    missing = [f"seedb-missing-{i:02d}" for i in range(n_missing)]
    all_refs = refs + missing
    rng.shuffle(all_refs)
    seed = record("seedb", "Deep Bidirectional Pretraining For Language Understanding", 2019, "NAACL",
                  authors(rng, 4), paragraph(rng, 150), all_refs, idea(rng, 50), 9000)
    dump(ROOT / "records" / "seedb.json", seed)
    for pid in outside:
        dump(ROOT / "records" / f"{pid}.json",
             record(pid, title(rng), rng.choice([2008, 2011, 2013]), rng.choice(VENUES), authors(rng),
                    paragraph(rng, 40), [], None, rng.randint(0, 900)))
    titles = {}
    for pid in refs:
        listed = [q for q in refs if q != pid and years[q] <= years[pid] and rng.random() < 0.22]
        # a few younger listings, which cannot become edges
        listed += [q for q in refs if years[q] > years[pid] and rng.random() < 0.03]
        listed += [q for q in outside if rng.random() < 0.2]
        titles[pid] = title(rng)
        has_idea = rng.random() < 0.75
        dump(ROOT / "records" / f"{pid}.json",
             record(pid, titles[pid], years[pid], rng.choice(VENUES + [""]), authors(rng), paragraph(rng, 70),
                    listed, idea(rng, 25) if has_idea else None, rng.randint(0, 3000)))
    # two references get their idea extracted from TEI instead
    for pid in refs[:2]:
        path = ROOT / "records" / f"{pid}.json"
        rec = json.loads(path.read_text())
        rec["idea"] = None
        dump(path, rec)
        doc = tei_document(rec["title"], [("Introduction", [paragraph(rng, 60)]), ("Method", [paragraph(rng, 80)])], [])
        (ROOT / "tei" / f"{pid}.tei.xml").write_text(doc, encoding="utf-8")

    dump(ROOT / "links" / "seedb.json",
         [{"target": pid, "is_influential": rng.random() < 0.3, "contexts": [sentence(rng, 8)]} for pid in sorted(refs)])

    keys = {pid: f"b{i}" for i, pid in enumerate(sorted(all_refs))}
    bibl = []
    for pid in sorted(all_refs):
        if pid in titles:
            t = titles[pid]
            if rng.random() < 0.15:  # GROBID-style typo: joined only by the fuzzy rule
                pos = rng.randrange(len(t) // 2, len(t))
                t = t[:pos] + t[pos + 1:]
            bibl.append((keys[pid], t, years[pid], ["Some Author"], "Proc"))
        else:
            bibl.append((keys[pid], title(rng), 2016, ["Other Author"], "arXiv"))
    section_names = ["Introduction", "Background", "Model Architecture", "Experiments", "Toy Problems", "Conclusion"]
    counts = {keys[pid]: (rng.randint(1, 6), rng.sample(range(len(section_names)), 2)) for pid in refs}
    secs = spread_citations(rng, counts, section_names)
    doc = tei_document(seed["title"], list(zip(section_names, secs)), bibl)
    (ROOT / "tei" / "seedb.tei.xml").write_text(doc, encoding="utf-8")


# --- seed C: small 2021 seed, idea extracted from TEI -----------------------

def make_seedc(rng):
    refs = [f"seedc-r{i}" for i in range(8)]
    years = [2016, 2018, 2019, 2020, 2020, 2021, None, 2017]
    outer = [f"seedc-x{i}" for i in range(4)]
    seed = record("seedc", "Sparse Mixture Routing For Efficient Inference", 2021, "ICML", authors(rng, 5),
                  paragraph(rng, 120), refs, None, 300)
    dump(ROOT / "records" / "seedc.json", seed)
    for i, pid in enumerate(outer):
        dump(ROOT / "records" / f"{pid}.json",
             record(pid, title(rng), 2013 + i, rng.choice(VENUES), authors(rng), paragraph(rng, 30), [],
                    idea(rng, 15), rng.randint(0, 100)))
    bibl = []
    for i, pid in enumerate(refs):
        listed = [refs[j] for j in range(8) if j != i and years[j] and years[i] and years[j] <= years[i] and rng.random() < 0.5]
        listed += [outer[i % 4]]
        t = title(rng)
        dump(ROOT / "records" / f"{pid}.json",
             record(pid, t, years[i], rng.choice(VENUES), authors(rng), paragraph(rng, 40) if i != 2 else "", listed,
                    idea(rng, 20) if i % 3 else None, rng.randint(0, 400)))
        bibl.append((f"b{i}", t, years[i], ["A Person"], "Venue"))
    dump(ROOT / "links" / "seedc.json",
         [{"target": pid, "is_influential": i % 2 == 0, "contexts": []} for i, pid in enumerate(refs)])
    section_names = ["Introduction", "Related Work", "Method", "Evaluation"]
    counts = {f"b{i}": (i % 4 + 1, [i % 4, (i + 2) % 4]) for i in range(8)}
    secs = spread_citations(rng, counts, section_names)
    doc = tei_document(seed["title"], list(zip(section_names, secs)), bibl)
    (ROOT / "tei" / "seedc.tei.xml").write_text(doc, encoding="utf-8")


# --- evaluation inputs ------------------------------------------------------

FIELDS = ["Problem", "Existing Methods", "Motivation", "Proposed Method", "Experiment Plan"]


def make_eval(rng):
    out = ROOT.parent / "eval"
    out.mkdir(exist_ok=True)
    seeds = ["gpt3", "seedb", "seedc"]
    golds = {s: idea(rng, 12) for s in seeds}
    for name in ["graph", "plain", "zero"]:
        lines = [json.dumps({"seed_id": s, "idea": idea(rng, 10)}, sort_keys=True) for s in seeds]
        (out / f"method_{name}.jsonl").write_text("\n".join(lines) + "\n")
    (out / "gold.jsonl").write_text(
        "\n".join(json.dumps({"seed_id": s, "idea": golds[s]}, sort_keys=True) for s in seeds) + "\n")
    cands = []
    for s in seeds:
        for k in range(4):
            cand = idea(rng, 10)
            if k == 2:  # shares half of the gold method text
                words = golds[s]["Proposed Method"].split()
                cand["Proposed Method"] = " ".join(words[: len(words) // 2]) + " " + cand["Proposed Method"]
            cands.append({"seed_id": s, "k": k, "idea": None if (s == "seedb" and k == 0) else cand})
    (out / "candidates.jsonl").write_text("\n".join(json.dumps(c, sort_keys=True) for c in cands) + "\n")
    dim = 8
    emb = [json.dumps({"dimension": dim, "source_tag": "fixture-random"})]
    for s in seeds:
        for role in ["gold"] + [f"candidate_{k}" for k in range(4)]:
            for f in FIELDS:
                vec = [round(rng.uniform(-1, 1), 6) for _ in range(dim)]
                emb.append(json.dumps({"seed_id": s, "role": role, "field": f, "vector": vec}))
    (out / "embeddings.jsonl").write_text("\n".join(emb) + "\n")
    verdict_a = {"novelty": "A", "significance": "A", "feasibility": "tie", "clarity": "B", "effectiveness": "A"}
    script = {"queue": [{"text": json.dumps(verdict_a)}, {"text": "not a verdict"}, {"error": "transient"}],
              "synthetic": True}
    dump(out / "judge_script.json", script)


def main():
    if ROOT.exists():
        for p in sorted(ROOT.rglob("*"), reverse=True):
            p.unlink() if p.is_file() else p.rmdir()
    rng = random.Random(20200528)
    make_gpt3(rng)
    make_seedb(rng)
    make_seedc(rng)
    make_eval(random.Random(20240917))
    corpus = ROOT.parent / "corpus"
    corpus.mkdir(exist_ok=True)
    (corpus / "train.tsv").write_text(
        "# id\tyear\tvenue\ttitle\n"
        "gpt3\t2020\tNeurIPS\tLanguage Models Are Few Shot Learners At Scale\n"
        "seedb\t2019\tNAACL\tDeep Bidirectional Pretraining For Language Understanding\n")
    (corpus / "test.tsv").write_text(
        "# id\tyear\tvenue\ttitle\n"
        "seedc\t2021\tICML\tSparse Mixture Routing For Efficient Inference\n")


if __name__ == "__main__":
    main()
