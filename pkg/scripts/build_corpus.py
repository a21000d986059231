#!/usr/bin/env python3
"""Regenerate the round-trip benchmark corpus under corpus/.

One directory per case: table.csv, query.txt, and optionally an
expected output (expected.json for a single value, expected_columns.csv
for new columns, expected.csv for a new table).  Expected values are
computed here with plain csv + arithmetic, independent of the engine,
so the corpus doubles as an interpreter oracle.
"""

import csv
import json
import os
import shutil
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
FIXTURES = os.path.join(ROOT, "tests", "fixtures")
CORPUS = os.path.join(ROOT, "corpus")

MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun",
          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def read_rows(name):
    with open(os.path.join(FIXTURES, name), newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def slash_year(s):
    yy = int(s.split("/")[-1])
    return 1900 + yy if yy >= 30 else 2000 + yy


SB = read_rows("superbowl.csv")
AS = read_rows("astronauts.csv")
HS = read_rows("houses.csv")

sb_winner_pts = [float(r["Winner Pts"]) for r in SB]
sb_loser_pts = [float(r["Loser Pts"]) for r in SB]


def single(value):
    return ("expected.json", json.dumps({"shape": "single_value", "value": value}, indent=2))


def columns(names_cells):
    out = [",".join(f'"{n}"' if "," in n else n for n, _ in names_cells)]
    n = len(names_cells[0][1])
    for i in range(n):
        row = []
        for _, cells in names_cells:
            text = fmt(cells[i])
            if "," in text or '"' in text:
                text = '"' + text.replace('"', '""') + '"'
            row.append(text)
        out.append(",".join(row))
    return ("expected_columns.csv", "\n".join(out) + "\n")


def new_table(names_cells):
    name, body = columns(names_cells)
    return ("expected.csv", body)


def host_state_sizes():
    sizes = {}
    for r in SB:
        sizes[r["Host State"]] = sizes.get(r["Host State"], 0) + 1
    ordered = sorted(sizes.items())
    return new_table([("Host State", [k for k, _ in ordered]),
                      ("size", [float(v) for _, v in ordered])])


def first_rows_table(rows, header, n):
    return new_table([(h, [r[h] for r in rows[:n]]) for h in header])


def house_filter():
    keep = [r for r in HS
            if float(r["yr_built"]) > 1970 and float(r["yr_renovated"]) != 0
            and float(r["sqft_basement"]) != 0]
    header = list(HS[0].keys())
    return new_table([(h, [float(r[h]) for r in keep]) for h in header])


CASES = [
    # (case id, fixture, query, expected or None)
    ("sb01_rowcount_host_city", "superbowl.csv",
     "(1) select rows where column Host City is New Orleans, (2) return number of rows",
     single(sum(1 for r in SB if r["Host City"] == "New Orleans"))),
    ("sb02_filter_project_count", "superbowl.csv",
     "(1) select rows where column Winner is New Orleans Saints, (2) select column Winner, (3) count",
     single(sum(1 for r in SB if r["Winner"] == "New Orleans Saints"))),
    ("sb03_filter_frame_count", "superbowl.csv",
     "(1) select rows where column Winner is New Orleans Saints, (2) count", None),
    ("sb04_sum", "superbowl.csv",
     "(1) select column Winner Pts, (2) sum", single(sum(sb_winner_pts))),
    ("sb05_average", "superbowl.csv",
     "(1) select column Winner Pts, (2) average",
     single(sum(sb_winner_pts) / len(sb_winner_pts))),
    ("sb06_max", "superbowl.csv",
     "(1) select column Winner Pts, (2) maximum", single(max(sb_winner_pts))),
    ("sb07_min", "superbowl.csv",
     "(1) select column Loser Pts, (2) minimum", single(min(sb_loser_pts))),
    ("sb08_idxmax", "superbowl.csv",
     "(1) select column Winner Pts, (2) position of the maximum",
     single(sb_winner_pts.index(max(sb_winner_pts)))),
    ("sb09_and_filter", "superbowl.csv",
     "(1) select rows where column Winner Pts greater than 30 and column Host State is Florida, "
     "(2) return number of rows",
     single(sum(1 for r in SB
                if float(r["Winner Pts"]) > 30 and r["Host State"] == "Florida"))),
    ("sb10_or_filter", "superbowl.csv",
     "(1) select rows where column Winner Pts less than 20 or column Loser Pts less than or "
     "equal to 10, (2) return number of rows",
     single(sum(1 for r in SB
                if float(r["Winner Pts"]) < 20 or float(r["Loser Pts"]) <= 10))),
    ("sb11_not_filter", "superbowl.csv",
     "(1) select rows where not column Host State is Florida, (2) return number of rows",
     single(sum(1 for r in SB if r["Host State"] != "Florida"))),
    ("sb12_subtract", "superbowl.csv",
     "(1) create column Point Gap, (2) column Winner Pts - column Loser Pts",
     columns([("Point Gap", [a - b for a, b in zip(sb_winner_pts, sb_loser_pts)])])),
    ("sb13_add", "superbowl.csv",
     "(1) create column Total Pts, (2) column Winner Pts + column Loser Pts",
     columns([("Total Pts", [a + b for a, b in zip(sb_winner_pts, sb_loser_pts)])])),
    ("sb14_multiply", "superbowl.csv",
     "(1) create column Double Pts, (2) column Winner Pts * 2",
     columns([("Double Pts", [a * 2 for a in sb_winner_pts])])),
    ("sb15_year", "superbowl.csv",
     "(1) select column Date, (2) year",
     columns([("year", [float(r["Date"].split()[-1]) for r in SB])])),
    ("sb16_groupby_size", "superbowl.csv",
     "(1) group by column Host State, (2) size of each group", host_state_sizes()),
    ("sb17_slice", "superbowl.csv",
     "(1) take rows 1 to 5", first_rows_table(SB, list(SB[0].keys()), 5)),
    ("sb18_element", "superbowl.csv",
     "(1) select column Winner Pts, (2) take element 1 of the array",
     single(sb_winner_pts[0])),
    ("sb19_character", "superbowl.csv",
     "(1) select column Winner, (2) take character 1 of the text",
     columns([("Winner", [r["Winner"][0] for r in SB])])),
    ("sb20_first_word", "superbowl.csv",
     "(1) select column MVP, (2) split the text, (3) take word 1 of the list",
     columns([("MVP", [r["MVP"].split()[0] for r in SB])])),
    ("sb21_split_len", "superbowl.csv",
     "(1) select column MVP, (2) split the text on ' ', (3) len",
     columns([("MVP", [float(len(r["MVP"].split(" "))) for r in SB])])),
    ("sb22_lower", "superbowl.csv",
     "(1) select column Stadium, (2) lower",
     columns([("Stadium", [r["Stadium"].lower() for r in SB])])),
    ("sb23_replace", "superbowl.csv",
     "(1) select column Winner, (2) replace 'New' with 'Old'",
     columns([("Winner", [r["Winner"].replace("New", "Old") for r in SB])])),
    ("sb24_contains_filter", "superbowl.csv",
     "(1) select rows where contains 'Patriots' from column Winner, (2) return number of rows",
     single(sum(1 for r in SB if "Patriots" in r["Winner"]))),
    ("sb25_dimensions", "superbowl.csv",
     "(1) get the dimensions",
     new_table([("rows", [float(len(SB))]), ("columns", [float(len(SB[0]))])])),
    ("sb26_dimension_rows", "superbowl.csv",
     "(1) get the dimensions, (2) take the rows", single(len(SB))),
    ("sb27_transpose", "superbowl.csv",
     "(1) transpose the table", None),
    ("sb28_strip", "superbowl.csv",
     "(1) select column Host City, (2) strip",
     columns([("Host City", [r["Host City"].strip() for r in SB])])),
    ("as29_comma_count", "astronauts.csv",
     "(1) create column Mission Count, (2) count ',' from column Missions + 1",
     columns([("Mission Count", [float(r["Missions"].count(",") + 1) for r in AS])])),
    ("as30_div_missing", "astronauts.csv",
     "(1) create column Walk Ratio, (2) column Space Walks (hr) divided by column Space Walks",
     columns([("Walk Ratio",
               [None if float(r["Space Walks"]) == 0
                else float(r["Space Walks (hr)"]) / float(r["Space Walks"]) for r in AS])])),
    ("as31_split_len_chain", "astronauts.csv",
     "(1) create column mission_count, (2) select column Missions, (3) split the text on ',', "
     "(4) len",
     columns([("mission_count", [float(len(r["Missions"].split(","))) for r in AS])])),
    ("as32_count_chain", "astronauts.csv",
     "(1) create column STS Count, (2) select column Missions, (3) calculate count 'STS'",
     columns([("STS Count", [float(r["Missions"].count("STS")) for r in AS])])),
    ("as33_birth_year", "astronauts.csv",
     "(1) select column Birth Date, (2) year",
     columns([("year", [float(slash_year(r["Birth Date"])) for r in AS])])),
    ("as34_ceil_day", "astronauts.csv",
     "(1) select column Birth Date, (2) round up to 'D'",
     columns([("Birth Date",
               [f"{MONTHS[int(r['Birth Date'].split('/')[0]) - 1]} "
                f"{int(r['Birth Date'].split('/')[1])} {slash_year(r['Birth Date'])}"
                for r in AS])])),
    ("as35_two_statements", "astronauts.csv",
     "(1) create column mission_count from len from the text split on ',' from column Missions, "
     "(2) create column avg_len from column Space Flight (hr) divided by column mission_count",
     columns([
         ("mission_count", [float(len(r["Missions"].split(","))) for r in AS]),
         ("avg_len", [float(r["Space Flight (hr)"]) / len(r["Missions"].split(","))
                      for r in AS]),
     ])),
    ("as36_last_word", "astronauts.csv",
     "(1) select column Missions, (2) split the text on ',', (3) take the last word of the list",
     columns([("Missions", [r["Missions"].split(",")[-1] for r in AS])])),
    ("sb37_bind_variable", "superbowl.csv",
     "(1) define variable top as maximum from column Winner Pts, "
     "(2) create column Is Top from column Winner Pts is variable top",
     columns([("Is Top", [p == max(sb_winner_pts) for p in sb_winner_pts])])),
    ("hs38_three_criteria_column", "houses.csv",
     "(1) create column good, (2) column yr_built greater than or equal to 1970 and "
     "column sqft_basement NotEq 0 and column yr_renovated NotEq 0",
     columns([("good", [float(r["yr_built"]) >= 1970 and float(r["sqft_basement"]) != 0
                        and float(r["yr_renovated"]) != 0 for r in HS])])),
    ("hs39_three_criteria_filter", "houses.csv",
     "(1) select rows where column yr_built greater than 1970 and column yr_renovated NotEq 0 "
     "and column sqft_basement NotEq 0", house_filter()),
    ("hs40_avg_price", "houses.csv",
     "(1) select column price, (2) average",
     single(sum(float(r["price"]) for r in HS) / len(HS))),
]


def main():
    if os.path.exists(CORPUS):
        shutil.rmtree(CORPUS)
    os.makedirs(CORPUS)
    for case_id, fixture, query, expected in CASES:
        case_dir = os.path.join(CORPUS, case_id)
        os.makedirs(case_dir)
        shutil.copy(os.path.join(FIXTURES, fixture), os.path.join(case_dir, "table.csv"))
        with open(os.path.join(case_dir, "query.txt"), "w", encoding="utf-8") as f:
            f.write(query + "\n")
        if expected is not None:
            name, body = expected
            with open(os.path.join(case_dir, name), "w", encoding="utf-8") as f:
                f.write(body if body.endswith("\n") else body + "\n")
    with open(os.path.join(CORPUS, "README.md"), "w", encoding="utf-8") as f:
        f.write(
            "# Benchmark corpus\n\n"
            "Generated by scripts/build_corpus.py. One directory per case:\n"
            "table.csv + query.txt, plus an optional expected output\n"
            "(expected.json single value, expected_columns.csv new columns,\n"
            "expected.csv new table). Expected values are computed with plain\n"
            "csv arithmetic in the build script, independent of the engine.\n\n"
            f"{len(CASES)} cases. Run:\n\n"
            "    nl2grid bench --corpus corpus --backend mock\n"
        )
    print(f"wrote {len(CASES)} cases to {CORPUS}")


if __name__ == "__main__":
    sys.exit(main())
