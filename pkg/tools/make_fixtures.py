"""Regenerate the bundled fixtures under src/stool/data.

    python tools/make_fixtures.py

Output is deterministic; tests pin counts and aggregates derived from it.
"""
import json
import random
from pathlib import Path

from stool.codec import ToolCall, call_from_tool_call, encode_call, normalize_schema, render_stream_text, baseline_json_render
from stool.tokens import ByteTokenizer

DATA = Path(__file__).resolve().parents[1] / "src" / "stool" / "data"


def P(name, required=True, type_="string", description=""):
    d = {"name": name, "type": type_, "required": required}
    if description:
        d["description"] = description
    return d


# ---------------------------------------------------------------- mobile_mini

MOBILE_TOOLS = [
    {"name": "turn_on_flashlight", "parameters": []},
    {"name": "turn_off_flashlight", "parameters": []},
    {"name": "open_wifi_settings", "parameters": []},
    {"name": "show_map", "parameters": [P("query", description="place or address to show")]},
    {"name": "send_email", "parameters": [P("to"), P("subject"), P("body", required=False)]},
    {"name": "create_calendar_event", "parameters": [P("title"), P("datetime"), P("location", required=False), P("duration_minutes", required=False, type_="integer")]},
    {"name": "create_contact", "parameters": [P("first_name"), P("last_name"), P("phone_number", required=False), P("email", required=False)]},
]

ENV = "Device: Pixel 8, locale en-US, current time 2025-12-19T08:30"


def mobile_samples():
    S = []

    def add(query, calls, environment=None, history=None):
        d = {"id": f"ma-{len(S) + 1:03d}", "query": query, "tools": MOBILE_TOOLS, "calls": calls}
        if environment:
            d["environment"] = environment
        if history:
            d["history"] = history
        S.append(d)

    def c(name, **kw):
        return {"name": name, "arguments": kw}

    add("Turn on my flashlight and show me the nearest bookstore on the map",
        [c("turn_on_flashlight"), c("show_map", query="nearest bookstore")])
    add("Turn on the flashlight", [c("turn_on_flashlight")])
    add("Switch off the torch please", [c("turn_off_flashlight")])
    add("Open the wifi settings", [c("open_wifi_settings")], environment=ENV)
    add("Where is the Louvre?", [c("show_map", query="Louvre Museum, Paris")])
    add("Show me coffee shops near Union Square", [c("show_map", query="coffee shops near Union Square")])
    add("Email alice@example.com with subject Lunch and say see you at noon",
        [c("send_email", to="alice@example.com", subject="Lunch", body="See you at noon")])
    add("Send bob@example.org an email titled Report",
        [c("send_email", to="bob@example.org", subject="Report")])
    add("Add a dentist appointment tomorrow at 9am",
        [c("create_calendar_event", title="Dentist appointment", datetime="2025-12-20T09:00")], environment=ENV)
    add("Schedule team sync on Monday 10:30 in room 4B for 45 minutes",
        [c("create_calendar_event", title="Team sync", datetime="2025-12-22T10:30", location="Room 4B", duration_minutes=45)],
        environment=ENV)
    add("Save a new contact Maria Lopez, phone 555-0134",
        [c("create_contact", first_name="Maria", last_name="Lopez", phone_number="555-0134")])
    add("Add John Smith to my contacts with email john.smith@example.com",
        [c("create_contact", first_name="John", last_name="Smith", email="john.smith@example.com")])
    add("Create contact Wei Zhang, 555-0199, wei@example.cn and then email him the subject Welcome",
        [c("create_contact", first_name="Wei", last_name="Zhang", phone_number="555-0199", email="wei@example.cn"),
         c("send_email", to="wei@example.cn", subject="Welcome")])
    add("Turn off the flashlight, open wifi settings and show the closest pharmacy",
        [c("turn_off_flashlight"), c("open_wifi_settings"), c("show_map", query="closest pharmacy")])
    add("Book a calendar event Yoga at 6pm today and show the studio on the map",
        [c("create_calendar_event", title="Yoga", datetime="2025-12-19T18:00"), c("show_map", query="yoga studio")],
        environment=ENV)
    add("Email carol@example.com about the Budget review, then add a reminder event for it Friday 3pm, "
        "then put Carol Diaz in contacts, and finally turn on the flashlight",
        [c("send_email", to="carol@example.com", subject="Budget review"),
         c("create_calendar_event", title="Budget review", datetime="2025-12-26T15:00"),
         c("create_contact", first_name="Carol", last_name="Diaz", email="carol@example.com"),
         c("turn_on_flashlight")])
    add("Show Golden Gate Park", [c("show_map", query="Golden Gate Park")])
    add("Send an email to team@example.com subject Standup body Running 5 minutes late",
        [c("send_email", to="team@example.com", subject="Standup", body="Running 5 minutes late")])
    add("Now also show the route to the airport", [c("show_map", query="route to the airport")],
        history=[c("turn_on_flashlight")])
    add("Add event Dinner with parents on Sunday 7pm at Luigi's",
        [c("create_calendar_event", title="Dinner with parents", datetime="2025-12-21T19:00", location="Luigi's")])
    add("Map the nearest EV charger and turn the torch on",
        [c("show_map", query="nearest EV charger"), c("turn_on_flashlight")])
    add("Open wifi settings", [c("open_wifi_settings")])
    add("Create a contact for Ana Silva", [c("create_contact", first_name="Ana", last_name="Silva")])
    add("Email dev@example.com subject Build failed body See CI log 4411",
        [c("send_email", to="dev@example.com", subject="Build failed", body="See CI log 4411")])
    return S


# ---------------------------------------------------------------- calls_500

WORDS = (
    "alpha bridge canyon delta ember falcon garden harbor island jasmine kernel lantern meadow nebula "
    "orchid prairie quartz river summit timber umbra valley willow xenon yonder zephyr amber cobalt "
    "crimson golden silver violet northern southern eastern western quick quiet bright gentle"
).split()
CITIES = ["Beijing", "San Francisco", "Buenos Aires", "Reykjavik", "Kuala Lumpur", "Johannesburg", "Vancouver", "Marseille"]


def sentence(rng, lo, hi):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def date(rng):
    return f"2025-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"


GEN_TOOLS = [
    ({"name": "get_weather", "parameters": [P("location"), P("date"), P("unit", required=False)]},
     lambda r: {"location": r.choice(CITIES), "date": date(r), **({"unit": r.choice(["celsius", "fahrenheit"])} if r.random() < .5 else {})}),
    ({"name": "search", "parameters": [P("search_query"), P("result_language", required=False)]},
     lambda r: {"search_query": sentence(r, 2, 5), **({"result_language": r.choice(["en", "de", "zh"])} if r.random() < .4 else {})}),
    ({"name": "send_msg", "parameters": [P("recipient_address"), P("message_text")]},
     lambda r: {"recipient_address": r.choice(CITIES).split()[0].lower() + "@ex.io", "message_text": sentence(r, 3, 6)}),
    ({"name": "translate", "parameters": [P("source_text"), P("target_language")]},
     lambda r: {"source_text": sentence(r, 3, 6), "target_language": r.choice(["fr", "es", "ja", "ko"])}),
    ({"name": "add_note", "parameters": [P("note_title"), P("note_body"), P("tags", required=False, type_="array")]},
     lambda r: {"note_title": sentence(r, 1, 3), "note_body": sentence(r, 3, 6),
                **({"tags": [r.choice(WORDS) for _ in range(r.randint(1, 3))]} if r.random() < .5 else {})}),
    ({"name": "book_flight", "parameters": [P("origin"), P("destination"), P("date"), P("passengers", type_="integer"), P("cabin", required=False)]},
     lambda r: {"origin": r.choice(CITIES), "destination": r.choice(CITIES), "date": date(r), "passengers": r.randint(1, 4),
                **({"cabin": r.choice(["economy", "business"])} if r.random() < .5 else {})}),
    ({"name": "set_timer", "parameters": [P("duration_minutes", type_="integer"), P("timer_label", required=False)]},
     lambda r: {"duration_minutes": r.randint(1, 90), **({"timer_label": sentence(r, 1, 3)} if r.random() < .7 else {})}),
    ({"name": "run_query", "parameters": [P("sql_statement"), P("database_name", required=False)]},
     lambda r: {"sql_statement": f"SELECT {r.choice(WORDS)} FROM {r.choice(WORDS)}",
                **({"database_name": r.choice(["prod", "dev"])} if r.random() < .5 else {})}),
]


def calls_500(n=500, seed=20250101):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        schema, gen = GEN_TOOLS[rng.randrange(len(GEN_TOOLS))]
        args = gen(rng)
        out.append({"id": f"c{i:04d}", "query": f"request {i}", "tools": [schema], "calls": [{"name": schema["name"], "arguments": args}]})
    return out


# ---------------------------------------------------------------- corpus


def corpus(samples, tok):
    lines = []
    for s in samples:
        schema = normalize_schema(s["tools"][0] if len(s["tools"]) == 1 else next(t for t in s["tools"] if t["name"] == s["calls"][0]["name"]))
        call = call_from_tool_call(ToolCall.from_dict(s["calls"][0]), schema)
        lines.append(f"User: {s['query']}")
        lines.append(baseline_json_render(call, schema))
        lines.append(render_stream_text(encode_call(call, schema, tok), tok))
    return "\n".join(lines) + "\n"


def main():
    tok = ByteTokenizer()
    DATA.mkdir(parents=True, exist_ok=True)
    mobile = mobile_samples()
    (DATA / "mobile_mini.jsonl").write_text("".join(json.dumps(s) + "\n" for s in mobile))
    c500 = calls_500()
    (DATA / "calls_500.jsonl").write_text("".join(json.dumps(s) + "\n" for s in c500))
    (DATA / "corpus.txt").write_text(corpus(c500[:300], tok))
    (DATA / "oracle_config.json").write_text(json.dumps({
        "backend": {"kind": "oracle"},
        "cost": {"t_prefill_per_token": 0.01, "t_mem": 1.0, "t_compute_per_seq": 0.05},
        "overhead_factor": 1.082,
        "seed": 0,
        "batches": [1, 2, 4, 8, 16, 32, 64, 128],
    }, indent=2) + "\n")
    (DATA / "ngram_config.json").write_text(json.dumps({
        "backend": {"kind": "ngram", "corpus": "corpus.txt", "order": 4, "alpha": 0.01, "seed": 0},
        "draft_backend": {"kind": "ngram", "corpus": "corpus.txt", "order": 2, "alpha": 0.01, "seed": 0},
        "cost": {"t_prefill_per_token": 0.01, "t_mem": 1.0, "t_compute_per_seq": 0.05},
        "max_tokens_per_head": 48,
        "max_tokens_baseline": 160,
        "speculation_depth": 4,
        "seed": 0,
    }, indent=2) + "\n")


if __name__ == "__main__":
    main()
