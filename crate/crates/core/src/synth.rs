//! Synthetic household knowledge graph.
//!
//! 291 entities (4 rooms, 43 locations, 189 objects, 35 actions, 20 states)
//! and 11 relations, roughly 6k facts. Facts are sampled from latent object
//! categories so that relation paths carry real signal: an object's rooms
//! follow from its locations, and a tool operates on an object when the tool
//! is used for an action the object affords *and* the two share a room.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{DatasetSplits, EntityId, LabeledTriple, RelationId, Triple, Vocabulary};

pub const RELATIONS: [&str; 11] = [
    "HasEffect",
    "InverseActionOf",
    "InverseStateOf",
    "LocInRoom",
    "ObjCanBe",
    "ObjInLoc",
    "ObjInRoom",
    "ObjOnLoc",
    "ObjUsedTo",
    "ObjHasState",
    "OperatesOn",
];

const ROOMS: [&str; 4] = ["kitchen", "bedroom", "bathroom", "livingroom"];

const LOCATIONS: [(&str, &[&str]); 43] = [
    ("fridge", &["kitchen"]),
    ("table", &["kitchen", "livingroom"]),
    ("sink", &["kitchen", "bathroom"]),
    ("garbage", &["kitchen"]),
    ("bed", &["bedroom"]),
    ("desk", &["bedroom", "livingroom"]),
    ("cabinet", &["kitchen", "bathroom"]),
    ("drawer", &["kitchen", "bedroom"]),
    ("counter", &["kitchen"]),
    ("shelf", &["livingroom", "bedroom"]),
    ("bookshelf", &["livingroom"]),
    ("closet", &["bedroom"]),
    ("wardrobe", &["bedroom"]),
    ("nightstand", &["bedroom"]),
    ("sofa", &["livingroom"]),
    ("coffee_table", &["livingroom"]),
    ("tv_stand", &["livingroom"]),
    ("dresser", &["bedroom"]),
    ("bathtub", &["bathroom"]),
    ("shower", &["bathroom"]),
    ("toilet", &["bathroom"]),
    ("bathroom_counter", &["bathroom"]),
    ("bathroom_cabinet", &["bathroom"]),
    ("medicine_cabinet", &["bathroom"]),
    ("kitchen_table", &["kitchen"]),
    ("kitchen_counter", &["kitchen"]),
    ("pantry", &["kitchen"]),
    ("dish_rack", &["kitchen"]),
    ("stovetop", &["kitchen"]),
    ("laundry_basket", &["bathroom", "bedroom"]),
    ("hamper", &["bedroom"]),
    ("coat_rack", &["livingroom"]),
    ("shoe_rack", &["livingroom"]),
    ("fireplace", &["livingroom"]),
    ("windowsill", &["kitchen", "livingroom", "bedroom"]),
    ("floor", &["kitchen", "bedroom", "bathroom", "livingroom"]),
    ("dining_table", &["livingroom"]),
    ("armchair", &["livingroom"]),
    ("ottoman", &["livingroom"]),
    ("towel_rack", &["bathroom"]),
    ("cupboard", &["kitchen"]),
    ("freezer", &["kitchen"]),
    ("trash_can", &["kitchen", "bathroom"]),
];

const ACTIONS: [&str; 35] = [
    "wipe",
    "scrub",
    "dust",
    "mop",
    "sponge",
    "disinfect",
    "sweep",
    "vacuum",
    "rinse",
    "wash",
    "dry",
    "cut",
    "peel",
    "stir",
    "cook",
    "bake",
    "boil",
    "fry",
    "heat",
    "cool",
    "pour",
    "drink",
    "eat",
    "open",
    "close",
    "pick_up",
    "put_down",
    "turn_on",
    "turn_off",
    "plug_in",
    "unplug",
    "fold",
    "unfold",
    "wear",
    "read",
];

const STATES: [&str; 20] = [
    "dirty",
    "clean",
    "wet",
    "dry_state",
    "on",
    "off",
    "cooked",
    "raw",
    "broken",
    "open_state",
    "closed",
    "plugged_in",
    "unplugged",
    "full",
    "empty",
    "hot",
    "cold",
    "folded",
    "sliced",
    "stained",
];

const HAS_EFFECT: [(&str, &str); 31] = [
    ("wipe", "clean"),
    ("scrub", "clean"),
    ("dust", "clean"),
    ("mop", "clean"),
    ("sponge", "clean"),
    ("disinfect", "clean"),
    ("sweep", "clean"),
    ("vacuum", "clean"),
    ("wash", "clean"),
    ("rinse", "wet"),
    ("wash", "wet"),
    ("dry", "dry_state"),
    ("cook", "cooked"),
    ("bake", "cooked"),
    ("fry", "cooked"),
    ("boil", "hot"),
    ("heat", "hot"),
    ("cool", "cold"),
    ("cut", "sliced"),
    ("peel", "sliced"),
    ("open", "open_state"),
    ("close", "closed"),
    ("turn_on", "on"),
    ("turn_off", "off"),
    ("plug_in", "plugged_in"),
    ("unplug", "unplugged"),
    ("fold", "folded"),
    ("pour", "empty"),
    ("drink", "empty"),
    ("eat", "empty"),
    ("wear", "dirty"),
];

const INVERSE_ACTIONS: [(&str, &str); 7] = [
    ("open", "close"),
    ("turn_on", "turn_off"),
    ("plug_in", "unplug"),
    ("pick_up", "put_down"),
    ("heat", "cool"),
    ("fold", "unfold"),
    ("wash", "dry"),
];

const INVERSE_STATES: [(&str, &str); 8] = [
    ("dirty", "clean"),
    ("wet", "dry_state"),
    ("on", "off"),
    ("open_state", "closed"),
    ("plugged_in", "unplugged"),
    ("full", "empty"),
    ("hot", "cold"),
    ("cooked", "raw"),
];

struct Category {
    objects: &'static [&'static str],
    in_locs: &'static [&'static str],
    on_locs: &'static [&'static str],
    affordances: &'static [&'static str],
    states: &'static [&'static str],
    used_to: &'static [&'static str],
}

const CATEGORIES: [Category; 14] = [
    Category {
        objects: &[
            "cleaning_rag",
            "towel",
            "wash_cloth",
            "washing_sponge",
            "scrubber",
            "feather_duster",
            "disinfectant_brush",
            "mop_head",
            "broom",
            "dustpan",
            "vacuum_cleaner",
            "squeegee",
            "toilet_brush",
            "dish_brush",
            "paper_towel",
            "duster_cloth",
        ],
        in_locs: &["cabinet", "closet", "bathroom_cabinet", "cupboard", "drawer"],
        on_locs: &["sink", "counter", "towel_rack", "floor", "bathroom_counter", "kitchen_counter"],
        affordances: &["pick_up", "put_down", "wash", "rinse", "dry", "fold", "unfold"],
        states: &["dirty", "clean", "wet", "dry_state", "folded", "stained"],
        used_to: &["wipe", "scrub", "dust", "mop", "sponge", "disinfect", "sweep", "vacuum", "dry"],
    },
    Category {
        objects: &[
            "knife",
            "fork",
            "spoon",
            "spatula",
            "ladle",
            "whisk",
            "peeler",
            "grater",
            "tongs",
            "can_opener",
            "cutting_board",
            "rolling_pin",
        ],
        in_locs: &["drawer", "cabinet", "dish_rack", "cupboard"],
        on_locs: &["counter", "kitchen_counter", "kitchen_table", "sink", "dish_rack"],
        affordances: &["pick_up", "put_down", "wash", "rinse", "dry"],
        states: &["dirty", "clean", "wet", "dry_state", "broken"],
        used_to: &["cut", "peel", "stir", "pour", "open", "eat"],
    },
    Category {
        objects: &[
            "pot",
            "pan",
            "kettle",
            "baking_tray",
            "frying_pan",
            "saucepan",
            "wok",
            "casserole_dish",
            "colander",
        ],
        in_locs: &["cabinet", "cupboard", "dish_rack"],
        on_locs: &["stovetop", "counter", "kitchen_counter", "sink"],
        affordances: &["pick_up", "put_down", "wash", "rinse", "dry", "scrub", "heat", "sponge"],
        states: &["dirty", "clean", "hot", "cold", "full", "empty", "wet"],
        used_to: &[],
    },
    Category {
        objects: &[
            "plate",
            "bowl",
            "cup",
            "mug",
            "glass",
            "wine_glass",
            "saucer",
            "serving_dish",
            "teapot",
            "water_bottle",
        ],
        in_locs: &["cabinet", "cupboard", "dish_rack"],
        on_locs: &["table", "kitchen_table", "dining_table", "counter", "sink", "coffee_table"],
        affordances: &["pick_up", "put_down", "wash", "rinse", "dry", "wipe", "sponge", "pour"],
        states: &["dirty", "clean", "full", "empty", "broken", "wet"],
        used_to: &[],
    },
    Category {
        objects: &[
            "tomato", "apple", "banana", "bread", "cheese", "egg", "milk", "carrot", "potato", "onion", "chicken",
            "cereal", "pasta", "rice", "orange", "lettuce", "butter", "cookie", "cake", "coffee", "juice", "yogurt",
            "salmon", "cucumber",
        ],
        in_locs: &["fridge", "pantry", "freezer", "cupboard"],
        on_locs: &["kitchen_table", "counter", "kitchen_counter", "dining_table"],
        affordances: &[
            "pick_up", "put_down", "cut", "peel", "cook", "bake", "boil", "fry", "eat", "rinse", "heat", "cool",
        ],
        states: &["cooked", "raw", "sliced", "hot", "cold"],
        used_to: &[],
    },
    Category {
        objects: &[
            "microwave",
            "toaster",
            "blender",
            "coffee_maker",
            "stove",
            "oven",
            "dishwasher",
            "washing_machine",
            "dryer",
            "rice_cooker",
            "mixer",
            "iron",
            "hair_dryer",
        ],
        in_locs: &["cabinet"],
        on_locs: &["counter", "kitchen_counter", "floor", "bathroom_counter"],
        affordances: &["open", "close", "turn_on", "turn_off", "plug_in", "unplug", "wipe", "disinfect", "dust"],
        states: &["on", "off", "plugged_in", "unplugged", "dirty", "clean", "open_state", "closed", "hot", "broken"],
        used_to: &["heat", "cook", "bake", "boil", "wash", "dry", "fry"],
    },
    Category {
        objects: &[
            "laptop",
            "computer",
            "television",
            "radio",
            "phone",
            "tablet",
            "lamp",
            "remote_control",
            "speaker",
            "printer",
            "camera",
            "clock",
            "fan",
            "heater",
            "router",
        ],
        in_locs: &["drawer", "shelf"],
        on_locs: &["desk", "tv_stand", "nightstand", "coffee_table", "shelf", "table"],
        affordances: &[
            "turn_on", "turn_off", "plug_in", "unplug", "pick_up", "put_down", "dust", "wipe", "open", "close",
        ],
        states: &["on", "off", "plugged_in", "unplugged", "broken", "dirty", "clean"],
        used_to: &[],
    },
    Category {
        objects: &[
            "chair",
            "stool",
            "rug",
            "pillow",
            "cushion",
            "blanket",
            "curtain",
            "mirror",
            "painting",
            "vase",
            "candle",
            "plant",
            "photo_frame",
            "doormat",
            "lampshade",
        ],
        in_locs: &["closet"],
        on_locs: &["floor", "sofa", "bed", "armchair", "shelf", "windowsill", "fireplace"],
        affordances: &["dust", "wipe", "vacuum", "pick_up", "put_down", "fold", "unfold", "disinfect", "scrub"],
        states: &["dirty", "clean", "folded", "broken", "stained"],
        used_to: &[],
    },
    Category {
        objects: &[
            "shirt", "pants", "sock", "jacket", "sweater", "dress", "hat", "scarf", "shoe", "slipper", "pajamas",
            "coat", "glove",
        ],
        in_locs: &["closet", "wardrobe", "dresser", "hamper", "laundry_basket"],
        on_locs: &["bed", "coat_rack", "shoe_rack", "floor", "armchair"],
        affordances: &["wear", "fold", "unfold", "wash", "dry", "pick_up", "put_down"],
        states: &["dirty", "clean", "wet", "dry_state", "folded", "stained"],
        used_to: &[],
    },
    Category {
        objects: &[
            "toothbrush",
            "toothpaste",
            "soap",
            "shampoo",
            "conditioner",
            "razor",
            "comb",
            "hairbrush",
            "lotion",
            "deodorant",
            "toilet_paper",
            "tissue",
            "perfume",
        ],
        in_locs: &["medicine_cabinet", "bathroom_cabinet", "drawer"],
        on_locs: &["bathroom_counter", "sink", "bathtub", "shower", "toilet"],
        affordances: &["pick_up", "put_down", "open", "close", "rinse"],
        states: &["full", "empty", "wet", "dry_state", "open_state", "closed"],
        used_to: &[],
    },
    Category {
        objects: &[
            "bleach",
            "detergent",
            "dish_soap",
            "disinfectant",
            "glass_cleaner",
            "polish",
            "laundry_detergent",
            "fabric_softener",
            "air_freshener",
            "trash_bag",
            "bucket",
            "cleaning_spray",
        ],
        in_locs: &["cabinet", "bathroom_cabinet", "pantry", "closet"],
        on_locs: &["sink", "floor", "counter", "bathroom_counter"],
        affordances: &["pick_up", "put_down", "open", "close", "pour"],
        states: &["full", "empty", "open_state", "closed"],
        used_to: &["disinfect", "wash", "scrub", "wipe", "mop"],
    },
    Category {
        objects: &[
            "book",
            "notebook",
            "pen",
            "pencil",
            "crayon",
            "paper",
            "magazine",
            "envelope",
            "scissors",
            "stapler",
            "tape",
            "folder",
            "newspaper",
        ],
        in_locs: &["drawer", "bookshelf", "shelf"],
        on_locs: &["desk", "coffee_table", "nightstand", "table", "bookshelf"],
        affordances: &["read", "open", "close", "pick_up", "put_down", "fold", "unfold"],
        states: &["open_state", "closed", "folded", "broken", "stained"],
        used_to: &[],
    },
    Category {
        objects: &[
            "ball",
            "puzzle",
            "doll",
            "teddy_bear",
            "board_game",
            "guitar",
            "video_game",
            "deck_of_cards",
            "yoga_mat",
            "dumbbell",
        ],
        in_locs: &["closet", "shelf", "drawer"],
        on_locs: &["floor", "sofa", "bed", "shelf", "coffee_table"],
        affordances: &["pick_up", "put_down", "wash", "wipe", "dust", "open", "close"],
        states: &["dirty", "clean", "broken"],
        used_to: &[],
    },
    Category {
        objects: &[
            "box",
            "basket",
            "bag",
            "backpack",
            "suitcase",
            "jar",
            "bottle",
            "key",
            "wallet",
            "umbrella",
            "light_bulb",
            "battery",
            "charger",
            "extension_cord",
        ],
        in_locs: &["closet", "drawer", "cabinet", "pantry"],
        on_locs: &["floor", "shelf", "desk", "table", "counter"],
        affordances: &["pick_up", "put_down", "open", "close", "plug_in", "unplug", "wipe"],
        states: &["full", "empty", "open_state", "closed", "broken"],
        used_to: &[],
    },
];

/// Split fractions and seed for the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HouseholdConfig {
    pub seed: u64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    /// Probability of keeping each category-level affordance/state for an object.
    pub keep_probability: f64,
}

impl Default for HouseholdConfig {
    fn default() -> Self {
        HouseholdConfig { seed: 17, valid_fraction: 0.1, test_fraction: 0.1, keep_probability: 1.0 }
    }
}

fn pick<'a>(rng: &mut impl Rng, from: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut v: Vec<&str> = from.to_vec();
    v.shuffle(rng);
    v.truncate(n.min(from.len()));
    v
}

/// Generate the household dataset with deterministic symbol order.
pub fn household(cfg: &HouseholdConfig) -> DatasetSplits {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vocab = Vocabulary::default();
    for name in ROOMS {
        vocab.entities.intern(name);
    }
    for (name, _) in LOCATIONS {
        vocab.entities.intern(name);
    }
    for c in &CATEGORIES {
        for o in c.objects {
            vocab.entities.intern(o);
        }
    }
    for a in ACTIONS {
        vocab.entities.intern(a);
    }
    for s in STATES {
        vocab.entities.intern(s);
    }
    for r in RELATIONS {
        vocab.relations.intern(r);
    }
    let e = |name: &str| EntityId(vocab.entities.get(name).unwrap_or_else(|| panic!("unknown entity {name}")));
    let r = |name: &str| RelationId(vocab.relations.get(name).unwrap());

    let mut facts: BTreeSet<Triple> = BTreeSet::new();
    let mut add = |h: &str, rel: &str, t: &str| {
        facts.insert(Triple::new(e(h), r(rel), e(t)));
    };

    let loc_rooms: BTreeMap<&str, &[&str]> = LOCATIONS.iter().copied().collect();
    for (loc, rooms) in LOCATIONS {
        for room in rooms {
            add(loc, "LocInRoom", room);
        }
    }
    for (a, s) in HAS_EFFECT {
        add(a, "HasEffect", s);
    }
    for (a, b) in INVERSE_ACTIONS {
        add(a, "InverseActionOf", b);
        add(b, "InverseActionOf", a);
    }
    for (a, b) in INVERSE_STATES {
        add(a, "InverseStateOf", b);
        add(b, "InverseStateOf", a);
    }

    struct ObjectFacts<'a> {
        name: &'a str,
        rooms: BTreeSet<&'a str>,
        affords: BTreeSet<&'a str>,
        used_to: BTreeSet<&'a str>,
    }
    let keep = cfg.keep_probability;
    let mut objects: Vec<ObjectFacts> = Vec::new();
    for c in &CATEGORIES {
        for &o in c.objects {
            let mut rooms = BTreeSet::new();
            if !c.in_locs.is_empty() && rng.gen_bool(0.55) {
                let n = if rng.gen_bool(0.3) { 2 } else { 1 };
                for loc in pick(&mut rng, c.in_locs, n) {
                    add(o, "ObjInLoc", loc);
                    rooms.extend(loc_rooms[loc].iter().copied());
                }
            }
            let n_on = rng.gen_range(1..=3);
            for loc in pick(&mut rng, c.on_locs, n_on) {
                add(o, "ObjOnLoc", loc);
                rooms.extend(loc_rooms[loc].iter().copied());
            }
            for room in &rooms {
                add(o, "ObjInRoom", room);
            }
            let mut affords = BTreeSet::new();
            for &a in c.affordances {
                if rng.gen_bool(keep) {
                    add(o, "ObjCanBe", a);
                    affords.insert(a);
                }
            }
            for &s in c.states {
                if rng.gen_bool(keep) {
                    add(o, "ObjHasState", s);
                }
            }
            let mut used_to = BTreeSet::new();
            if !c.used_to.is_empty() {
                let n = rng.gen_range(1..=2);
                for a in pick(&mut rng, c.used_to, n) {
                    add(o, "ObjUsedTo", a);
                    used_to.insert(a);
                }
            }
            objects.push(ObjectFacts { name: o, rooms, affords, used_to });
        }
    }
    for tool in objects.iter().filter(|o| !o.used_to.is_empty()) {
        for obj in &objects {
            if obj.name == tool.name {
                continue;
            }
            let shares_action = tool.used_to.iter().any(|a| obj.affords.contains(a));
            let shares_room = tool.rooms.iter().any(|room| obj.rooms.contains(room));
            if shares_action && shares_room {
                add(tool.name, "OperatesOn", obj.name);
            }
        }
    }

    split(Arc::new(vocab), facts, cfg, &mut rng)
}

fn split(
    vocab: Arc<Vocabulary>,
    facts: BTreeSet<Triple>,
    cfg: &HouseholdConfig,
    rng: &mut ChaCha8Rng,
) -> DatasetSplits {
    let mut by_rel: Vec<Vec<Triple>> = vec![Vec::new(); vocab.num_relations()];
    for t in facts {
        by_rel[t.relation.index()].push(t);
    }
    let mut train = Vec::new();
    let mut held: Vec<(Triple, bool)> = Vec::new(); // (triple, is_test)
    for mut list in by_rel {
        list.shuffle(rng);
        let n = list.len();
        let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
        let n_valid = ((n as f64) * cfg.valid_fraction).round() as usize;
        let n_test = n_test.min(n.saturating_sub(1));
        let n_valid = n_valid.min(n.saturating_sub(1 + n_test));
        for (i, t) in list.into_iter().enumerate() {
            if i < n_test {
                held.push((t, true));
            } else if i < n_test + n_valid {
                held.push((t, false));
            } else {
                train.push(t);
            }
        }
    }
    // Every held-out symbol must also occur in train.
    let mut seen_e: HashSet<EntityId> = HashSet::new();
    let mut seen_r: HashSet<RelationId> = HashSet::new();
    for t in &train {
        seen_e.insert(t.head);
        seen_e.insert(t.tail);
        seen_r.insert(t.relation);
    }
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for (t, is_test) in held {
        let covered = seen_e.contains(&t.head) && seen_e.contains(&t.tail) && seen_r.contains(&t.relation);
        if !covered {
            seen_e.insert(t.head);
            seen_e.insert(t.tail);
            seen_r.insert(t.relation);
            train.push(t);
        } else if is_test {
            test.push(t);
        } else {
            valid.push(t);
        }
    }
    let wrap = |v: Vec<Triple>| v.into_iter().map(LabeledTriple::positive).collect();
    DatasetSplits { vocab, train: wrap(train), valid: wrap(valid), test: wrap(test) }
}
