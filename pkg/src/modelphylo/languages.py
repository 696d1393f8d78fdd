"""Static ISO-639 allowlist used to recognise bare language tags.

Two-letter codes are the full ISO 639-1 set. Three-letter codes are a curated
subset of ISO 639-2/639-3 identifiers that registries commonly use for
languages lacking a two-letter code. Bare tags outside this table are never
read as languages, so short tags such as ``gg`` or ``ml-ops`` stay ordinary tags.
"""

ISO_639_1 = frozenset(
    """
    aa ab ae af ak am an ar as av ay az ba be bg bh bi bm bn bo br bs ca ce ch
    co cr cs cu cv cy da de dv dz ee el en eo es et eu fa ff fi fj fo fr fy ga
    gd gl gn gu gv ha he hi ho hr ht hu hy hz ia id ie ig ii ik io is it iu ja
    jv ka kg ki kj kk kl km kn ko kr ks ku kv kw ky la lb lg li ln lo lt lu lv
    mg mh mi mk ml mn mr ms mt my na nb nd ne ng nl nn no nr nv ny oc oj om or
    os pa pi pl ps pt qu rm rn ro ru rw sa sc sd se sg si sk sl sm sn so sq sr
    ss st su sv sw ta te tg th ti tk tl tn to tr ts tt tw ty ug uk ur uz ve vi
    vo wa wo xh yi yo za zh zu
    """.split()
)

ISO_639_3_COMMON = frozenset(
    """
    ace acm acq aeb ajp als apc arb ars ary arz ast awa azb ban bcl bem bho bjn
    bug ceb ckb crh diq dyu fil fon fur gaz gom grc gsw hak haw hif hne hsb ilo
    jbo kab kac kam kbp kea khk kik kmb kmr knc kon lij lim lmo ltg lua luo lus
    lvs mag mai min mni mos mri mzn nan nds nso nus pag pam pap pbt pes plt prs
    quy sag san scn shn smo sna snd srd szl taq tat tpi tsn tso tum twi tzm uzn
    vec war wuu ydd yue zsm zul
    afr amh ara aze bel ben bul cat ces cym dan deu ell eng est eus fas fin fra
    gle glg guj hau heb hin hrv hun hye ibo ind isl ita jav jpn kan kat kaz khm
    kin kir kor lao lav lit mal mar mkd mlg mlt msa mya nep nld nor orm pan pol
    por ron rus sin slk slv som spa sqi srp swa swe tam tel tgk tgl tha tir tuk
    tur ukr urd uzb vie xho yor zho
    """.split()
)

LANGUAGE_CODES = ISO_639_1 | ISO_639_3_COMMON


def is_language_code(tag: str) -> bool:
    return 2 <= len(tag) <= 3 and tag.isascii() and tag.isalpha() and tag.lower() in LANGUAGE_CODES
