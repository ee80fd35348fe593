"""Surface-form vocabularies and paraphrase phrase sets.

The wordings below were written for this toolkit. Only the ``original`` points
phrasing and the multi-entity warehouse phrasing follow published worked
examples verbatim; every other template is an independent rewording that keeps
the same operation sequence.

Placeholders: ``{name}`` entity, ``{x}`` starting value, ``{m}`` magnitude,
``{obj}`` tracked object, ``{v}`` assigned value.
"""

POINTS_NAMES = (
    "Alice", "Bob", "Carol", "David", "Emma", "Frank",
    "Grace", "Henry", "Irene", "James", "Karen", "Leo",
)
INVENTORY_ITEMS = (
    "crates", "pallets", "boxes", "barrels", "widgets", "cartons", "drums", "bins",
)
ACCOUNT_HOLDERS = (
    "Maria", "Tom", "Priya", "Omar", "Lena", "Victor", "Sofia", "Kenji", "Nadia", "Paul",
)

COLOR_OBJECTS = ("car", "bicycle", "fence", "door", "mug", "kite")
COLOR_VALUES = ("red", "blue", "green", "yellow", "purple", "orange", "white", "black")
LOCATION_OBJECTS = ("package", "robot", "drone", "courier", "parcel", "suitcase")
LOCATION_VALUES = ("Paris", "Tokyo", "Cairo", "Lima", "Oslo", "Denver", "Madrid", "Seoul")
STATUS_OBJECTS = ("order", "ticket", "shipment", "request", "invoice", "claim")
STATUS_VALUES = (
    "pending", "approved", "shipped", "delayed", "cancelled", "delivered", "rejected", "archived",
)

MULTI_ENTITY_ITEMS = ("Widget", "Gadget", "Sprocket", "Gear", "Valve", "Bolt", "Spring", "Lever")

ENTITY_NAMES = {
    "points": POINTS_NAMES,
    "inventory": INVENTORY_ITEMS,
    "accounts": ACCOUNT_HOLDERS,
    "color": COLOR_OBJECTS,
    "location": LOCATION_OBJECTS,
    "status": STATUS_OBJECTS,
}

ASSIGNMENT_VALUES = {
    "color": COLOR_VALUES,
    "location": LOCATION_VALUES,
    "status": STATUS_VALUES,
}

# template -> surface -> phrase set
ARITHMETIC_PHRASES = {
    "original": {
        "points": {
            "start": "{name} starts with {x} points.",
            "up": "{name} gains {m} points.",
            "down": "{name} loses {m} points.",
            "question": "What is {name}'s current score?",
        },
        "inventory": {
            "start": "The warehouse starts with {x} {name}.",
            "up": "The warehouse receives {m} {name}.",
            "down": "The warehouse ships out {m} {name}.",
            "question": "How many {name} are in the warehouse now?",
        },
        "accounts": {
            "start": "{name}'s bank account starts with {x} dollars.",
            "up": "{name} deposits {m} dollars.",
            "down": "{name} withdraws {m} dollars.",
            "question": "What is {name}'s account balance now?",
        },
    },
    "formal": {
        "points": {
            "start": "{name} begins the competition with a score of {x} points.",
            "up": "{name} is subsequently awarded {m} points.",
            "down": "{name} is subsequently penalized {m} points.",
            "question": "Please state {name}'s current score.",
        },
        "inventory": {
            "start": "The warehouse inventory initially records {x} {name}.",
            "up": "A delivery of {m} {name} is received into inventory.",
            "down": "A shipment of {m} {name} is dispatched from inventory.",
            "question": "Please state the number of {name} currently held in the warehouse.",
        },
        "accounts": {
            "start": "The account held by {name} has an opening balance of {x} dollars.",
            "up": "A deposit of {m} dollars is credited to {name}'s account.",
            "down": "A withdrawal of {m} dollars is debited from {name}'s account.",
            "question": "Please state the current balance of {name}'s account.",
        },
    },
    "casual": {
        "points": {
            "start": "So {name}'s got {x} points.",
            "up": "Then {name} picks up {m} more.",
            "down": "Then {name} drops {m}.",
            "question": "How many points does {name} have now?",
        },
        "inventory": {
            "start": "OK, so the warehouse has {x} {name} sitting around.",
            "up": "A truck drops off {m} more.",
            "down": "Then {m} go out the door.",
            "question": "How many {name} are left in there now?",
        },
        "accounts": {
            "start": "{name} has {x} bucks in the bank.",
            "up": "{name} puts in {m} more.",
            "down": "{name} pulls out {m}.",
            "question": "How much has {name} got in the bank now?",
        },
    },
    # Strips framing and units but keeps a final question.
    "minimal": {
        "points": {
            "start": "{name}: {x}.",
            "up": "+{m}.",
            "down": "-{m}.",
            "question": "{name} now?",
        },
        "inventory": {
            "start": "{name}: {x}.",
            "up": "+{m}.",
            "down": "-{m}.",
            "question": "{name} now?",
        },
        "accounts": {
            "start": "{name}: {x}.",
            "up": "+{m}.",
            "down": "-{m}.",
            "question": "{name} now?",
        },
    },
    "verbose": {
        "points": {
            "preamble": "In the following scenario, keep careful track of a running score as it changes over time.",
            "start": "At the beginning of the game, {name} starts out with a total of {x} points on the scoreboard.",
            "up": "Next, {name} earns an additional {m} points, which are added to the running total.",
            "down": "Next, {name} is penalized and loses {m} points, which are removed from the running total.",
            "question": "After all of these changes have been applied, what is {name}'s current score?",
        },
        "inventory": {
            "preamble": "You are monitoring stock levels at a warehouse. Keep careful track of the inventory as deliveries arrive and shipments leave.",
            "start": "At the start of the day, the warehouse has exactly {x} {name} in stock on its shelves.",
            "up": "Later, a supplier delivery arrives and the warehouse receives {m} additional {name}.",
            "down": "Later, a customer order is fulfilled and the warehouse ships out {m} {name}.",
            "question": "Once all of these deliveries and shipments are complete, how many {name} are in the warehouse now?",
        },
        "accounts": {
            "preamble": "The following describes a series of transactions on a bank account. Keep careful track of the balance after each transaction.",
            "start": "When the month begins, {name}'s checking account holds a balance of exactly {x} dollars.",
            "up": "Then {name} makes a deposit, adding {m} dollars to the account.",
            "down": "Then {name} makes a withdrawal, removing {m} dollars from the account.",
            "question": "After every one of these transactions has been processed, what is {name}'s account balance now?",
        },
    },
}

ASSIGNMENT_PHRASES = {
    "original": {
        "color": {
            "start": "The {obj} is {v}.",
            "assign": "The {obj} is repainted {v}.",
            "question": "What color is the {obj} now?",
        },
        "location": {
            "start": "The {obj} is in {v}.",
            "assign": "The {obj} moves to {v}.",
            "question": "Where is the {obj} now?",
        },
        "status": {
            "start": "The {obj} status is {v}.",
            "assign": "The {obj} status changes to {v}.",
            "question": "What is the {obj} status now?",
        },
    },
    "formal": {
        "color": {
            "start": "The {obj} is initially painted {v}.",
            "assign": "The {obj} is subsequently repainted {v}.",
            "question": "Please state the current color of the {obj}.",
        },
        "location": {
            "start": "The {obj} is initially located in {v}.",
            "assign": "The {obj} is subsequently relocated to {v}.",
            "question": "Please state the current location of the {obj}.",
        },
        "status": {
            "start": "The {obj} is initially recorded with status {v}.",
            "assign": "The status of the {obj} is subsequently updated to {v}.",
            "question": "Please state the current status of the {obj}.",
        },
    },
    "casual": {
        "color": {
            "start": "So the {obj} is {v}.",
            "assign": "Then somebody paints it {v}.",
            "question": "What color's the {obj} now?",
        },
        "location": {
            "start": "So the {obj} is hanging out in {v}.",
            "assign": "Then it heads off to {v}.",
            "question": "Where's the {obj} now?",
        },
        "status": {
            "start": "So the {obj} says {v}.",
            "assign": "Then it flips to {v}.",
            "question": "What's the {obj} status now?",
        },
    },
    "minimal": {
        "color": {"start": "{obj}: {v}.", "assign": "-> {v}.", "question": "{obj} color now?"},
        "location": {"start": "{obj}: {v}.", "assign": "-> {v}.", "question": "{obj} location now?"},
        "status": {"start": "{obj}: {v}.", "assign": "-> {v}.", "question": "{obj} status now?"},
    },
    "verbose": {
        "color": {
            "preamble": "In the following scenario, an object is repainted several times. Keep careful track of its color.",
            "start": "At the very beginning, the {obj} has been painted a bright shade of {v}.",
            "assign": "After a while, the owner decides to change things and repaints the {obj} {v}.",
            "question": "After all of these repaintings have taken place, what color is the {obj} now?",
        },
        "location": {
            "preamble": "In the following scenario, an object travels between several cities. Keep careful track of where it is.",
            "start": "At the very beginning, the {obj} is sitting in the city of {v}.",
            "assign": "After a while, the {obj} is transported onward and arrives in {v}.",
            "question": "After all of this travelling has taken place, where is the {obj} now?",
        },
        "status": {
            "preamble": "In the following scenario, a record's status is updated several times. Keep careful track of its status.",
            "start": "At the very beginning, the {obj} is entered into the system with the status {v}.",
            "assign": "After a while, the system processes the {obj} and its status becomes {v}.",
            "question": "After all of these updates have been processed, what is the {obj} status now?",
        },
    },
}

# template -> phrase set for the multi-entity warehouse mode
MULTI_ENTITY_PHRASES = {
    "original": {
        "start": "A warehouse has {n} items: {listing}.",
        "up": "Receive {m} {item}s.",
        "ship": "Ship {m} {item}s.",
        "transfer": "Transfer {m} {item}s to overflow.",
        "question": "What is the final count of each item? Answer in the form {form}.",
    },
    "formal": {
        "start": "The warehouse inventory records {n} items: {listing}.",
        "up": "A delivery of {m} {item}s is received.",
        "ship": "A shipment of {m} {item}s is dispatched.",
        "transfer": "A transfer of {m} {item}s to the overflow facility is completed.",
        "question": "Please state the final count of each item in the form {form}.",
    },
    "casual": {
        "start": "So the warehouse has {n} kinds of stuff: {listing}.",
        "up": "{m} {item}s show up.",
        "ship": "{m} {item}s get shipped.",
        "transfer": "{m} {item}s get moved to overflow.",
        "question": "What's left of each? Give it like {form}.",
    },
    "minimal": {
        "start": "{listing}.",
        "up": "{item} +{m}.",
        "ship": "{item} -{m}.",
        "transfer": "{item} -{m}.",
        "question": "{form}?",
    },
    "verbose": {
        "preamble": "You are monitoring stock levels for several products at a warehouse. Keep careful track of every product as deliveries arrive and shipments leave.",
        "start": "At the start of the day, the warehouse holds {n} different items with these counts: {listing}.",
        "up": "Later, a supplier delivery arrives containing {m} additional {item}s.",
        "ship": "Later, a customer order is fulfilled by shipping out {m} {item}s.",
        "transfer": "Later, {m} {item}s are transferred out to the overflow facility.",
        "question": "Once all of these movements are complete, what is the final count of each item? Answer in the form {form}.",
    },
}

# Prompt-wrapper texts sent alongside probes.
CHAT_SYSTEM_MESSAGE = "You are a helpful assistant."
COT_INSTRUCTION = "Think step by step, then state the final answer."
