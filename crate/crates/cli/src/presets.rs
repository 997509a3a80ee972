//! Bundled run configurations, selectable by name.

pub const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../configs/table1.toml")),
    ("table2", include_str!("../configs/table2.toml")),
    ("table3", include_str!("../configs/table3.toml")),
    ("table4", include_str!("../configs/table4.toml")),
    ("fig1", include_str!("../configs/fig1.toml")),
    ("fig2", include_str!("../configs/fig2.toml")),
    ("fig3b", include_str!("../configs/fig3b.toml")),
    ("fig4b", include_str!("../configs/fig4b.toml")),
    ("fig5", include_str!("../configs/fig5.toml")),
    ("fig6", include_str!("../configs/fig6.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
