"""Deterministic English-like corpus generator for tests and demos.

Samples words from a fixed pool with Zipf-ish weights (frequent words are
short function words, so character statistics resemble real English) and
sentence lengths between 4 and 30 tokens with a mean around 18.5, which
puts the average sentence near 100 characters. Lines are already
normalized: lowercase, single spaces, no punctuation except apostrophes.

Usage as a script: python textgen.py OUT_PATH N_SENTENCES [SEED]
"""

import sys

import numpy as np

FUNCTION_WORDS = """
the of and to a in that is was he for it with as his on be at by i this had
not are but from or have an they which one you were her all she there would
their we him been has when who will more no if out so said what up its about
into than them can only other new some could time these two may then do
first any my now such like our over man me even most made after also did
many before must through back years where much your way well down should
because each just those people mr how too little state good very make world
still own see men work long get here between both life being under never day
same another know while last might us great old year off come since against
go came right used take three
""".split()

CONTENT_WORDS = """
government president country member states european parliament committee
commission council report question policy support proposal debate vote
agreement directive market economy development cooperation security
situation important necessary possible clear particular general public
national international regional local social economic political financial
environmental legal common single internal within regard respect behalf
order framework basis process progress measures action programme system
information decision position majority minority citizens rights freedom
justice peace war conflict crisis problem solution result effect impact
change reform growth employment unemployment industry agriculture fisheries
transport energy research education culture health protection consumer
quality standards rules procedure principle practice experience knowledge
opinion view point discussion negotiation conference meeting session
presidency election referendum treaty constitution amendment article
paragraph budget funding resources investment trade exports imports
competition enterprise business company workers employees conditions wages
service services sector region area territory border immigration asylum
refugees integration enlargement candidate accession institutions
transparency accountability responsibility implementation application
enforcement monitoring evaluation assessment review revision strategy
objective target priority challenge opportunity risk threat benefit
advantage disadvantage balance approach method instrument mechanism
initiative effort attempt success failure improvement deterioration
increase decrease reduction level degree extent scope range limit
restriction requirement condition criterion aspect element factor feature
issue matter subject topic theme context background history future
perspective prospect outlook scenario model example case instance evidence
proof argument reason cause consequence conclusion recommendation
suggestion request demand requirement obligation commitment promise
guarantee assurance confidence trust doubt concern worry fear hope
expectation ambition aspiration dream vision mission task duty role
function purpose aim goal intention plan project scheme arrangement
structure organisation administration management leadership authority
power influence control supervision guidance direction instruction advice
assistance help aid relief rescue recovery reconstruction restoration
return departure arrival journey travel movement migration flow stream
current trend tendency pattern distribution allocation share proportion
percentage rate ratio figure number amount quantity volume size scale
dimension capacity ability capability skill competence qualification
training learning teaching instruction lesson course programme curriculum
school university college institute academy laboratory library museum
theatre cinema stadium hospital clinic pharmacy surgery treatment therapy
medicine drug vaccine disease illness infection epidemic pandemic virus
bacteria organism species animal plant forest ocean river mountain valley
island coast climate weather temperature pressure humidity rainfall drought
flood storm earthquake disaster emergency accident incident event occasion
celebration festival holiday anniversary birthday wedding funeral ceremony
tradition custom habit behaviour attitude opinion belief faith religion
church state nation society community family household parent child
children mother father brother sister husband wife partner friend neighbour
colleague citizen resident inhabitant population generation youth adult
elderly pensioner retirement pension insurance welfare benefit allowance
subsidy grant loan credit debt deficit surplus revenue income profit loss
cost price value worth wealth poverty prosperity wellbeing happiness
satisfaction comfort convenience safety danger hazard damage harm injury
wound pain suffering grief sorrow joy pleasure delight surprise shock
astonishment admiration respect honour dignity pride shame guilt blame
criticism praise approval rejection refusal acceptance admission denial
confession statement declaration announcement publication release edition
version translation interpretation explanation description definition
classification category class group team crew staff personnel workforce
union association federation alliance coalition partnership relationship
connection link bond tie network web chain series sequence succession
continuation interruption suspension termination cancellation abolition
introduction establishment foundation creation formation construction
production manufacture assembly installation maintenance repair
replacement renewal modernisation innovation invention discovery
exploration investigation inquiry examination inspection audit survey
census study analysis synthesis comparison contrast distinction difference
similarity resemblance identity character nature quality property
attribute characteristic trait feature detail particular item object
article product goods commodity material substance matter element
component ingredient part piece fragment section segment portion division
department branch office agency bureau desk counter window door gate
entrance exit corridor hall room chamber floor ceiling wall roof building
house home apartment flat residence accommodation shelter housing
settlement village town city capital metropolis suburb district quarter
neighbourhood street road avenue boulevard square park garden field farm
land ground soil earth stone rock sand water air fire light darkness shadow
colour sound noise silence voice speech language word sentence phrase
expression term vocabulary grammar style tone manner fashion mode form
shape figure outline profile image picture photograph painting drawing
sketch map chart diagram graph table list index register record document
file folder archive database collection set assortment variety diversity
plurality multitude majority minority remainder rest whole total sum
aggregate average mean median maximum minimum optimum extreme moderate
modest considerable substantial significant remarkable notable noteworthy
outstanding exceptional extraordinary unusual ordinary normal regular
frequent rare scarce abundant plentiful sufficient insufficient inadequate
appropriate suitable convenient favourable positive negative neutral
objective subjective relative absolute complete partial entire full empty
open closed free occupied busy available accessible remote distant near
close adjacent neighbouring surrounding central peripheral external
internal foreign domestic native local universal global worldwide
widespread
""".split()

APOSTROPHE_WORDS = "it's don't doesn't isn't wasn't aren't won't can't couldn't shouldn't we're they're you're i'm that's there's let's what's member's union's people's".split()

NUMBER_WORDS = "1990 1995 2000 2004 25 50 100 500 12 15 30 40 60 75 80 90 7 3 5 2".split()


def word_pool():
    # dedupe while preserving rank order: function words first
    seen = set()
    pool = []
    for w in FUNCTION_WORDS + APOSTROPHE_WORDS + CONTENT_WORDS + NUMBER_WORDS:
        if w not in seen:
            seen.add(w)
            pool.append(w)
    return pool


def generate_sentences(n_sentences: int, seed: int) -> list:
    pool = word_pool()
    rng = np.random.Generator(np.random.PCG64(seed))
    ranks = np.arange(1, len(pool) + 1, dtype=np.float64)
    weights = 1.0 / ranks**0.85
    weights /= weights.sum()
    lengths = np.clip(np.round(4 + 26 * rng.beta(2.6, 1.7, n_sentences)),
                      4, 30).astype(int)
    lines = []
    for n in lengths:
        words = rng.choice(pool, size=n, p=weights)
        lines.append(" ".join(words))
    return lines


def write_corpus(path, n_sentences: int, seed: int = 0):
    lines = generate_sentences(n_sentences, seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


if __name__ == "__main__":
    out = sys.argv[1]
    n = int(sys.argv[2])
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    write_corpus(out, n, seed)
    print(f"wrote {n} sentences to {out}")
