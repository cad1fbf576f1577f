"""Canonical 30-category scene label table.

Category IDs are 1-based in directory slugs, 0-based everywhere in code.
The slug form (``01_portrait`` ... ``30_monitor_screen``) is the dataset
directory convention; the display name is what models carry in their label
table and what the CLI prints.
"""

from __future__ import annotations

# (slug, display name), in canonical ID order.
CATEGORIES: tuple[tuple[str, str], ...] = (
    ("01_portrait", "Portrait"),
    ("02_group_portrait", "Group Portrait"),
    ("03_kids_infants", "Kids / Infants"),
    ("04_dog", "Dog"),
    ("05_cat", "Cat"),
    ("06_macro_close_up", "Macro / Close-up"),
    ("07_food_gourmet", "Food / Gourmet"),
    ("08_beach", "Beach"),
    ("09_mountains", "Mountains"),
    ("10_waterfalls", "Waterfalls"),
    ("11_snow", "Snow"),
    ("12_landscape", "Landscape"),
    ("13_underwater", "Underwater"),
    ("14_architecture", "Architecture"),
    ("15_sunrise_sunset", "Sunrise / Sunset"),
    ("16_blue_sky", "Blue Sky"),
    ("17_overcast_cloudy_sky", "Overcast / Cloudy Sky"),
    ("18_greenery_green_plants", "Greenery / Green Plants"),
    ("19_autumn_plants", "Autumn Plants"),
    ("20_flower", "Flower"),
    ("21_night_shot", "Night Shot"),
    ("22_stage_concert", "Stage / Concert"),
    ("23_fireworks", "Fireworks"),
    ("24_candlelight", "Candlelight"),
    ("25_neon_lights_signs", "Neon Lights / Signs"),
    ("26_indoor", "Indoor"),
    ("27_backlight_contre_jour", "Backlight / Contre-jour"),
    ("28_text_document", "Text / Document"),
    ("29_qr_code", "QR Code"),
    ("30_monitor_screen", "Monitor Screen"),
)

NUM_CATEGORIES = len(CATEGORIES)

SLUGS: tuple[str, ...] = tuple(slug for slug, _ in CATEGORIES)
LABELS: tuple[str, ...] = tuple(name for _, name in CATEGORIES)

SLUG_TO_INDEX: dict[str, int] = {slug: i for i, (slug, _) in enumerate(CATEGORIES)}
