"""Everyday vocabulary used to build the shipped lemma lexicon.

Each word carries exactly one coarse tag unless it appears in BOTH.
"""

NOUNS = """
accident actor adult afternoon air airplane airport alarm album alley animal ankle ant apartment
apple apron area arena arm army arrow art artist audience aunt baby back backpack bag baker bakery ball
balloon banana band bank bar barn base baseball basket basketball bat bath bathroom bathtub battery beach
bead beam bean bear beard bed bedroom bee beef beer bell belt bench berry bicycle bike bill bird birthday
biscuit blanket block blood blossom board boat body bone book bookshelf boot bottle bottom bow bowl box
boy bracelet brain branch bread breakfast brick bride bridge broom brother brush bubble bucket building
bull bunch burger bus bush butter butterfly button cabin cabinet cactus cafe cage cake calendar calf
camel camera camp campfire candle candy cane canoe canyon cap captain car card cardboard carpet
carriage carrot cart castle cat cattle cave ceiling cellphone chain chair chalk champion cheese chef
cherry chess chest chicken child chimney chin chocolate church cigarette circle city class classroom
cliff clock closet cloth clothes cloud clown club coach coast coat coffee coin collar color computer
concert cookie corn corner costume couch counter country court cousin cow crab crane crayon cream crowd
crown cup cupboard curb curtain customer dad dancer deck deer desert desk dessert diaper dinner dirt
dish doctor dog doll dollar dolphin donkey door dough dragon drawer dress driver drum duck dust eagle
ear earth egg elbow elephant engine evening eye face factory family farm farmer fence field finger fire
firefighter fish flag flame floor flour flower fly foam food foot football forest fork fountain fox
frame friend frisbee frog fruit garage garbage garden gate gift girl glass glove goal goat gold golf
grandmother grape grass ground guitar gun gym hair hall hallway ham hammer hand handle hat head heart
helmet herd hill hockey hole home hood hook horse hose hospital hotel house ice instrument island jacket
jar jeans jewelry juice kid kitchen kite kitten knee knife ladder lady lake lamb lamp lane laptop lawn
leaf leash leg lemon letter library light line lion lip lobby lock log machine magazine man map
market mask match meal meat medal menu metal microphone milk mirror money monkey moon morning mother
motorcycle mountain mouse mouth mud mug muscle museum music nail neck necklace needle nest net newspaper
night nose notebook nurse ocean office officer oil onion orange oven owner paddle page pail pan pants
paper parade park parking pasta path patient pavement paw pea peach pear pen pencil people pepper person
pet phone piano picture pie pig pillow pilot pipe pitch pitcher pizza plane plant plastic plate platform
player playground plow pocket pole police pond pool porch pot potato powder puck pumpkin puppy purse
puzzle rabbit race racket rail rain rainbow ramp razor referee restaurant rice ring river road robe
rock rocket roof room rope rose rug runner sail sailboat salad salt sand sandwich sauce sausage
scarf school scissors screen sea seat shadow shampoo sheep sheet shelf shell ship shirt shoe shop shore
shorts shoulder shovel shower side sidewalk sign singer sink sister skateboard skater ski skier skin skirt
sky sled snack snake snow snowboard snowman soap soccer sock sofa soldier soup spoon sport square stadium
stage stair staircase station statue steak stick stone stool store stove straw street string student
stroller suit suitcase sun sunglasses supermarket surface surfboard surfer sweater swimmer swing sword
table tail tank tattoo taxi tea teacher team tear telephone television tennis tent theater ticket
tie tiger tire toast toddler toilet tomato tongue tool tooth toothbrush towel tower town toy track
tractor traffic trail trailer train tray tree truck trumpet tub tube tunnel turkey turtle umbrella
uniform van vase vegetable vehicle vest video violin wagon waiter wall wallet water watermelon wave
weight whale wheel wheelchair whistle wife window wine wing winter woman wood worker wrist yard yarn
year zebra zoo chopstick clay dough grill ink kayak lettuce lid marker mat mop napkin
pebble pillar puddle quilt raft sponge stroller tent vacuum wrench
""".split()

VERBS = """
add arrange arrive ask attach bake bark bathe be become begin bend bite blow board boil bounce bow
break breathe bring brush build burn buy call carry carve catch chase cheer chew chop clap clean climb
close collect comb come cook cover crawl cross cry cut dance decorate deliver dig dip dive do drag draw
dress drink drive drop dry dunk eat enjoy enter explain fall feed feel fetch fill find finish fish fix
flip float fly fold follow get give glide go grab greet grow hang have hear help hike hit hold hug hunt
hurt iron jog juggle jump kick kiss kneel knit knock land laugh lay lead lean leap learn leave lick lie
lift light listen live load look lose make march marry meet melt milk mix move mow open order pack
paddle paint park pass pay pedal peel perform pet pick pile pitch place plant play point polish pose
pour practice pray prepare press pull pump punch push put race rake reach read relax release remove
repair rest ride ring rinse rise roast roll row rub run sail say score scrub see sell serve sew shake
shave shine shoot shop shout show shovel sing sink sip sit skate ski skip sleep slice slide smell smile
smoke sniff speak spin splash spray spread sprinkle squeeze stack stand stare start stay steer stir
stop stretch strike stroll study surf sweep swim swing take talk taste teach tear tell throw tie toss
touch tow train travel trim try turn type unload use vacuum wait wake walk wash watch water wave wear
weave weigh whisk win wipe work wrap write yell
""".split()

# Tagged with both NOUN and VERB; priority resolution picks NOUN.
BOTH = """
brush drink fish paint plant rake ride shovel ski smile swim swing walk wave work
""".split()

PROPER = """
america christmas halloween paris london santa thanksgiving
""".split()

# Function words whose surface would otherwise be mangled by suffix rules.
FUNCTION_EXCEPTIONS = {
    "was": "be", "is": "be", "are": "be", "were": "be", "am": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "his": "his", "its": "its", "this": "this", "thus": "thus", "as": "as", "us": "us",
    "yes": "yes", "less": "less", "during": "during", "nothing": "nothing", "something": "something",
    "anything": "anything", "everything": "everything", "morning": "morning", "evening": "evening",
    "ceiling": "ceiling", "building": "building", "clothes": "clothes", "pants": "pants",
    "jeans": "jeans", "shorts": "shorts", "scissors": "scissors", "glasses": "glass",
    "sunglasses": "sunglasses", "news": "news", "always": "always", "towards": "towards",
    "sometimes": "sometimes", "people": "people", "children": "child", "men": "man", "women": "woman",
    "feet": "foot", "teeth": "tooth", "mice": "mouse", "geese": "goose", "knives": "knife",
    "leaves": "leaf", "wives": "wife", "shelves": "shelf", "wolves": "wolf", "calves": "calf",
    "halves": "half", "lives": "live", "tomatoes": "tomato", "potatoes": "potato", "heroes": "hero",
    "dishes": "dish", "buses": "bus", "gases": "gas", "canoes": "canoe",
}
