#!/usr/bin/env python3
"""Regenerates the JSON fixtures in this directory."""
import json
from pathlib import Path

HERE = Path(__file__).resolve().parent

INTENTS = [
    ("service", "restaurants", "restaurants", ["cuisine", "price range", "outdoor seating", "reservations", "vegetarian options", "parking", "delivery", "opening hours"]),
    ("service", "appliance", "appliance repair", ["brand", "appliance type", "warranty", "same day service", "price estimate", "licensed technician", "reviews", "availability"]),
    ("service", "electrician", "electrician", ["licensed", "emergency service", "wiring", "panel upgrade", "price estimate", "availability", "insured", "reviews"]),
    ("service", "hotel", "hotel", ["dates", "price range", "pet friendly", "free breakfast", "pool", "parking", "star rating", "cancellation policy"]),
    ("service", "landscaping", "landscaping", ["lawn care", "tree trimming", "irrigation", "garden design", "price estimate", "weekly service", "yard size", "reviews"]),
    ("service", "handyman", "handyman", ["furniture assembly", "drywall repair", "painting", "hourly rate", "availability", "insured", "reviews", "tools provided"]),
    ("activity", "hike", "hike", ["dates", "kid friendly", "scenery", "difficulty", "trail length", "dog friendly", "parking", "restrooms", "elevation gain", "shade"]),
    ("service", "cleaners", "house cleaners", ["deep cleaning", "eco friendly products", "frequency", "price estimate", "pet friendly", "move out cleaning", "insured", "reviews"]),
    ("activity", "general", "things to do", ["dates", "kid friendly", "indoor", "free admission", "group size", "accessibility", "budget", "reservations"]),
    ("service", "remodeling", "remodeling", ["kitchen", "bathroom", "budget", "timeline", "permits", "design consultation", "licensed contractor", "reviews"]),
    ("activity", "spring_break", "spring break", ["dates", "beach", "budget", "group size", "nightlife", "all inclusive", "flights", "family friendly"]),
    ("activity", "daytrip", "day trip", ["dates", "driving distance", "kid friendly", "scenery", "budget", "food options", "museums", "parking"]),
    ("activity", "campground", "campground", ["dates", "rv hookups", "tent sites", "showers", "pet friendly", "lake access", "reservations", "fire pits"]),
    ("activity", "summercamp", "summer camp", ["age range", "dates", "overnight", "sports", "arts and crafts", "price range", "transportation", "swimming"]),
]

LOCATIONS = ["Austin", "Boston", "Chicago", "Denver", "Houston", "Phoenix", "Portland", "Seattle", "San Diego", "San Francisco"]

TODDLER_HIKE = ("Find hiking trails around San Francisco from May 9th to May 29th, 2021 "
        "that are accessible with toddlers and have beautiful scenery")


def slot_id(intent, label):
    return intent + "." + label.replace(" ", "_")


def fnv1a64(text):
    h = 0xcbf29ce484222325
    for b in text.strip().encode():
        h ^= b
        h = (h * 0x100000001b3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def main():
    ontology = {
        "version": 1,
        "topics": [{"id": "service", "label": "service"}, {"id": "activity", "label": "activity"}],
        "intents": [{"id": i, "topic": t, "label": l} for t, i, l, _ in INTENTS],
        "slots": [{"id": slot_id(i, s), "topic": t, "intent": i, "label": s, "curated": True}
                  for t, i, _, slots in INTENTS for s in slots],
    }
    (HERE / "ontology.json").write_text(json.dumps(ontology, indent=2) + "\n")
    (HERE / "locations.txt").write_text("\n".join(LOCATIONS) + "\n")

    examples = [
        {"request": "Looking for a vegetarian restaurant in Boston with outdoor seating",
         "topic": "service", "intent": "restaurants", "location": "Boston",
         "slots": [{"label": "vegetarian options", "aspect": "vegetarian"}, {"label": "outdoor seating", "aspect": "outdoor seating"}]},
        {"request": "Need someone to fix my Samsung fridge this week, it is still under warranty",
         "topic": "service", "intent": "appliance",
         "slots": [{"label": "brand", "aspect": "Samsung"}, {"label": "appliance type", "aspect": "fridge"},
                   {"label": "availability", "aspect": "this week"}, {"label": "warranty", "aspect": "under warranty"}]},
        {"request": "Licensed electrician in Denver to upgrade my panel",
         "topic": "service", "intent": "electrician", "location": "Denver",
         "slots": [{"label": "licensed", "aspect": "licensed"}, {"label": "panel upgrade", "aspect": "upgrade my panel"}]},
        {"request": "Pet friendly hotel in Seattle for June 3 to June 6 with free breakfast",
         "topic": "service", "intent": "hotel", "location": "Seattle",
         "slots": [{"label": "pet friendly", "aspect": "pet friendly"}, {"label": "dates", "aspect": "June 3 to June 6"},
                   {"label": "free breakfast", "aspect": "free breakfast"}]},
        {"request": "Weekly lawn care and tree trimming for a large yard in Austin",
         "topic": "service", "intent": "landscaping", "location": "Austin",
         "slots": [{"label": "weekly service", "aspect": "weekly"}, {"label": "lawn care", "aspect": "lawn care"},
                   {"label": "tree trimming", "aspect": "tree trimming"}, {"label": "yard size", "aspect": "large yard"}]},
        {"request": "Easy dog friendly hike near Portland under 5 miles",
         "topic": "activity", "intent": "hike", "location": "Portland",
         "slots": [{"label": "difficulty", "aspect": "easy"}, {"label": "dog friendly", "aspect": "dog friendly"},
                   {"label": "trail length", "aspect": "under 5 miles"}]},
        {"request": "Campground near Lake Tahoe with showers and rv hookups for July 4th weekend",
         "topic": "activity", "intent": "campground", "location": "Lake Tahoe",
         "slots": [{"label": "showers", "aspect": "showers"}, {"label": "rv hookups", "aspect": "rv hookups"},
                   {"label": "dates", "aspect": "July 4th weekend"}]},
        {"request": "Overnight summer camp for a 10 year old who loves swimming",
         "topic": "activity", "intent": "summercamp",
         "slots": [{"label": "overnight", "aspect": "overnight"}, {"label": "age range", "aspect": "10 year old"},
                   {"label": "swimming", "aspect": "swimming"}]},
    ]
    (HERE / "few_shot.json").write_text(json.dumps(examples, indent=2) + "\n")

    completions = {}
    for ex in examples:
        frame = {"topic": ex["topic"], "intent": ex["intent"], "slots": ex["slots"]}
        if "location" in ex:
            frame["location"] = ex["location"]
        completions[fnv1a64(ex["request"])] = json.dumps(frame)
    completions[fnv1a64(TODDLER_HIKE)] = json.dumps({
        "topic": "activity", "intent": "hike",
        "slots": [{"label": "dates", "aspect": "May 9th to May 29th, 2021"},
                  {"label": "kid friendly", "aspect": "accessible with toddlers"},
                  {"label": "scenery", "aspect": "beautiful scenery"}],
        "location": "San Francisco"})
    completions[fnv1a64("Book a one way flight from Boston to Paris next Friday")] = json.dumps(
        {"topic": "travel", "intent": "flights", "slots": [], "location": "Paris"})
    (HERE / "completions.json").write_text(json.dumps(completions, indent=2, sort_keys=True) + "\n")

    hike = next(x for x in INTENTS if x[1] == "hike")
    search = {}
    trails = ["Lands End Trail", "Mount Sutro Loop", "Glen Canyon Park", "Crissy Field Promenade"]
    for label in hike[3]:
        query = f"hike with {label} in San Francisco"
        search[query] = {"webPages": {"value": [
            {"name": f"{trail}: {label}", "url": f"https://trails.example.com/sf/{trail.lower().replace(' ', '-')}",
             "snippet": f"{trail} in San Francisco, a hike known for {label}."}
            for trail in trails[: 2 + len(label) % 3]]}}
    (HERE / "search_fixtures.json").write_text(json.dumps(search, indent=2) + "\n")

    policy = {
        "defaults": {"epsilon": 0.1, "epsilon_decay": 0.9997, "percentile": 80, "percentile_decay": 0.998,
                     "window": 500, "softmax_temperature": 1.0, "bootstrap_resamples": 10, "ucb_percentile": 80,
                     "ridge_lambda": 1.0},
        "epsilon_greedy": {"epsilon": 0.1},
        "softmax_explorer": {"softmax_temperature": 1.0},
    }
    (HERE / "policy.json").write_text(json.dumps(policy, indent=2) + "\n")

    # historical slot counts; dates, scenery and kid friendly stay rare for hikes
    weights = [40, 26, 18, 12, 8, 5, 3, 2, 1, 1]
    orders = {"hike": ["difficulty", "trail length", "dog friendly", "parking", "elevation gain", "restrooms", "shade",
                       "dates", "scenery", "kid friendly"]}
    profile = {}
    for n, (t, i, _, slots) in enumerate(INTENTS):
        order = orders.get(i, slots[n % len(slots):] + slots[:n % len(slots)])
        for label, w in zip(order, weights):
            profile[f"{t}/{i}/{slot_id(i, label)}"] = w
    (HERE / "profile.json").write_text(json.dumps(profile, indent=2) + "\n")

    sim = {"seed": 7, "n_intents": 14, "n_slots_per_intent": 20, "n_requests": 100, "coupling_strength": 5.0,
           "slate_size": 3, "dirichlet_alpha": 0.3, "noise": 0.05, "max_steps": 6}
    (HERE / "simulation.json").write_text(json.dumps(sim, indent=2) + "\n")


if __name__ == "__main__":
    main()
