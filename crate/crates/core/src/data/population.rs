//! Resident population of U.S. states, July 1 2019 estimates from the
//! Census Bureau's Vintage 2019 series (NST-EST2019-01).

const STATES: &[(&str, &str, u64)] = &[
    ("Alabama", "AL", 4_903_185),
    ("Alaska", "AK", 731_545),
    ("Arizona", "AZ", 7_278_717),
    ("Arkansas", "AR", 3_017_804),
    ("California", "CA", 39_512_223),
    ("Colorado", "CO", 5_758_736),
    ("Connecticut", "CT", 3_565_287),
    ("Delaware", "DE", 973_764),
    ("District of Columbia", "DC", 705_749),
    ("Florida", "FL", 21_477_737),
    ("Georgia", "GA", 10_617_423),
    ("Hawaii", "HI", 1_415_872),
    ("Idaho", "ID", 1_787_065),
    ("Illinois", "IL", 12_671_821),
    ("Indiana", "IN", 6_732_219),
    ("Iowa", "IA", 3_155_070),
    ("Kansas", "KS", 2_913_314),
    ("Kentucky", "KY", 4_467_673),
    ("Louisiana", "LA", 4_648_794),
    ("Maine", "ME", 1_344_212),
    ("Maryland", "MD", 6_045_680),
    ("Massachusetts", "MA", 6_892_503),
    ("Michigan", "MI", 9_986_857),
    ("Minnesota", "MN", 5_639_632),
    ("Mississippi", "MS", 2_976_149),
    ("Missouri", "MO", 6_137_428),
    ("Montana", "MT", 1_068_778),
    ("Nebraska", "NE", 1_934_408),
    ("Nevada", "NV", 3_080_156),
    ("New Hampshire", "NH", 1_359_711),
    ("New Jersey", "NJ", 8_882_190),
    ("New Mexico", "NM", 2_096_829),
    ("New York", "NY", 19_453_561),
    ("North Carolina", "NC", 10_488_084),
    ("North Dakota", "ND", 762_062),
    ("Ohio", "OH", 11_689_100),
    ("Oklahoma", "OK", 3_956_971),
    ("Oregon", "OR", 4_217_737),
    ("Pennsylvania", "PA", 12_801_989),
    ("Rhode Island", "RI", 1_059_361),
    ("South Carolina", "SC", 5_148_714),
    ("South Dakota", "SD", 884_659),
    ("Tennessee", "TN", 6_829_174),
    ("Texas", "TX", 28_995_881),
    ("Utah", "UT", 3_205_958),
    ("Vermont", "VT", 623_989),
    ("Virginia", "VA", 8_535_519),
    ("Washington", "WA", 7_614_893),
    ("West Virginia", "WV", 1_792_147),
    ("Wisconsin", "WI", 5_822_434),
    ("Wyoming", "WY", 578_759),
];

/// Looks a state up by full name or postal code, ignoring case.
pub fn state_population(region: &str) -> Option<u64> {
    let r = region.trim();
    STATES
        .iter()
        .find(|(name, code, _)| name.eq_ignore_ascii_case(r) || code.eq_ignore_ascii_case(r))
        .map(|(_, _, p)| *p)
}

pub fn state_names() -> impl Iterator<Item = &'static str> {
    STATES.iter().map(|(n, _, _)| *n)
}
