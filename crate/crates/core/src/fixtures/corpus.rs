//! Built-in scenario corpora.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Action, Cue, Scenario};
use super::screen::{IconShape, Screen, ScrollList, TextField, Widget, BASE_W, TAB_Y, TITLE_H};
use crate::geometry::{Point, Rect};
use crate::raster::Rgb;
use crate::trace::Direction;

pub const DEFAULT_SEED: u64 = 7;
pub const HOLD: usize = 6;
pub const FPS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Smoke,
    Train,
    Eval,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoke" => Ok(Self::Smoke),
            "train" => Ok(Self::Train),
            "eval" => Ok(Self::Eval),
            other => Err(format!("unknown profile {other:?} (smoke, train, eval)")),
        }
    }
}

const LABELS: &[&str] = &[
    "History", "Settings", "Library", "Albums", "Podcasts", "Friends", "Messages", "Photos", "Music", "Videos",
    "Downloads", "Account", "Privacy", "Help", "Offers", "Orders", "Wallet", "Maps", "Events", "Notes",
    "Recipes", "Weather", "News", "Sports", "Travel", "Games", "Books", "Radio", "Shop", "Deals",
];

const TITLES: &[&str] = &[
    "Overview", "Details", "Profile", "Activity", "Discover", "Summary", "Inbox", "Updates", "Explore", "Today",
];

const SHORT: &[&str] = &["Red", "Sun", "Oak", "Sky", "Ice", "Fox", "Owl", "Bay", "Elm", "Ivy", "Jam", "Kit"];

const TABS: &[[&str; 3]] = &[["Home", "Feed", "Me"], ["Start", "Saved", "More"], ["Main", "Lists", "You"]];

const TITLE_FILLS: &[Rgb] = &[[0.2, 0.35, 0.75], [0.15, 0.5, 0.4], [0.55, 0.2, 0.5], [0.3, 0.3, 0.35], [0.7, 0.3, 0.15]];

const FILLS: &[Rgb] = &[
    [0.85, 0.9, 1.0],
    [0.9, 0.95, 0.85],
    [1.0, 0.9, 0.8],
    [0.92, 0.85, 0.95],
    [0.3, 0.45, 0.8],
    [0.2, 0.6, 0.45],
    [0.8, 0.35, 0.3],
];

const ICON_FILLS: &[Rgb] = &[[0.85, 0.3, 0.25], [0.25, 0.55, 0.85], [0.3, 0.65, 0.35], [0.6, 0.35, 0.75], [0.9, 0.6, 0.15]];

const SHAPES: [IconShape; 6] =
    [IconShape::Plus, IconShape::Dot, IconShape::Bars, IconShape::Cross, IconShape::Ring, IconShape::Triangle];

const CUES: [Cue; 3] = [Cue::Ripple, Cue::Expand, Cue::ColorChange];

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty")
}

/// Content area between the title bar and the tab bar.
fn content_area() -> Rect {
    Rect::new(4.0, TITLE_H + 4.0, BASE_W as f64 - 8.0, TAB_Y - TITLE_H - 8.0)
}

fn fits(rect: &Rect, placed: &[Widget]) -> bool {
    content_area().contains_rect(rect) && placed.iter().all(|w| !w.rect.inflated(3.0).intersects(rect))
}

/// Random non-overlapping widget inside `region`; labels come from `labels`.
fn place_widget(rng: &mut ChaCha8Rng, region: &Rect, placed: &[Widget], label: Option<&str>) -> Option<Widget> {
    for _ in 0..200 {
        let rect = match label {
            Some(l) => {
                let min_w = (l.len() * 6 + 8) as f64;
                let w = rng.gen_range(min_w..=(min_w + 40.0).min(content_area().w)).round();
                let h = rng.gen_range(14.0f64..=30.0).round();
                Rect::new(rng.gen_range(region.x..=(region.right() - w).max(region.x)).round(), rng.gen_range(region.y..=(region.bottom() - h).max(region.y)).round(), w, h)
            }
            None => {
                let s = rng.gen_range(16.0f64..=32.0).round();
                Rect::new(rng.gen_range(region.x..=(region.right() - s).max(region.x)).round(), rng.gen_range(region.y..=(region.bottom() - s).max(region.y)).round(), s, s)
            }
        };
        if !fits(&rect, placed) {
            continue;
        }
        return Some(match label {
            Some(l) => Widget::labeled(rect, *pick(rng, FILLS), l),
            None => Widget::icon(rect, *pick(rng, ICON_FILLS), *pick(rng, &SHAPES)),
        });
    }
    None
}

fn quadrant(q: usize) -> Rect {
    let c = content_area();
    let (hw, hh) = (c.w / 2.0, c.h / 2.0);
    Rect::new(c.x + hw * (q % 2) as f64, c.y + hh * (q / 2) as f64, hw, hh)
}

/// Screen with a few labelled buttons and icons.
fn widget_screen(rng: &mut ChaCha8Rng, title: &str, labels: &[&str], icons: usize) -> Screen {
    let mut s = Screen::new(title, *pick(rng, TITLE_FILLS));
    s.tabs = pick(rng, TABS).iter().map(|t| t.to_string()).collect();
    for l in labels {
        if let Some(w) = place_widget(rng, &content_area(), &s.widgets, Some(l)) {
            s.widgets.push(w);
        }
    }
    for _ in 0..icons {
        if let Some(w) = place_widget(rng, &content_area(), &s.widgets, None) {
            s.widgets.push(w);
        }
    }
    s
}

fn labeled_screen(rng: &mut ChaCha8Rng, title: &str, labels: usize, icons: usize) -> Screen {
    let labels = distinct_labels(rng, labels);
    widget_screen(rng, title, &labels, icons)
}

fn other_title(rng: &mut ChaCha8Rng, avoid: &Screen) -> String {
    loop {
        let t = pick(rng, TITLES).to_string();
        if t != avoid.title {
            return t;
        }
    }
}

fn tap_point(rng: &mut ChaCha8Rng, r: &Rect) -> Point {
    Point::new(
        (r.x + r.w * rng.gen_range(0.3..0.7)).round() + 0.5,
        (r.y + r.h * rng.gen_range(0.3..0.7)).round() + 0.5,
    )
}

fn tap(rng: &mut ChaCha8Rng, element: Rect, cue: Cue, next: Screen, title_match: bool, tab: bool) -> Action {
    Action::Tap { element, point: tap_point(rng, &element), cue, next: Box::new(next), title_match, tab }
}

fn distinct_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    let mut v: Vec<&str> = LABELS.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v
}

fn vertical_list(rng: &mut ChaCha8Rng, title: &str, offset: i64) -> Screen {
    let mut s = Screen::new(title, *pick(rng, TITLE_FILLS));
    s.tabs = pick(rng, TABS).iter().map(|t| t.to_string()).collect();
    let mut labels: Vec<&str> = LABELS.to_vec();
    labels.shuffle(rng);
    let items = labels
        .iter()
        .take(18)
        .enumerate()
        .map(|(i, l)| Widget::labeled(Rect::new(6.0, TITLE_H + 4.0 + 28.0 * i as f64, 116.0, 22.0), FILLS[i % 4], *l))
        .collect();
    s.list = Some(ScrollList { viewport: Rect::new(0.0, TITLE_H, BASE_W as f64, TAB_Y - TITLE_H), items, offset: (0, offset) });
    s
}

fn card_grid(rng: &mut ChaCha8Rng, title: &str, offset: i64) -> Screen {
    let mut s = Screen::new(title, *pick(rng, TITLE_FILLS));
    s.tabs = pick(rng, TABS).iter().map(|t| t.to_string()).collect();
    let mut words: Vec<&str> = SHORT.to_vec();
    words.shuffle(rng);
    let mut items = Vec::new();
    for r in 0..4 {
        for c in 0..10 {
            let label = format!("{}{}", words[c % words.len()], r + 1);
            let rect = Rect::new(4.0 + 42.0 * c as f64, TITLE_H + 10.0 + 48.0 * r as f64, 36.0, 40.0);
            items.push(Widget::labeled(rect, FILLS[(r + c) % 4], label));
        }
    }
    s.list = Some(ScrollList { viewport: Rect::new(0.0, TITLE_H, BASE_W as f64, TAB_Y - TITLE_H), items, offset: (offset, 0) });
    s
}

fn search_screen(rng: &mut ChaCha8Rng, keyboard: bool) -> Screen {
    let mut s = Screen::new("Find", *pick(rng, TITLE_FILLS));
    s.field = Some(TextField { rect: Rect::new(4.0, TITLE_H + 6.0, BASE_W as f64 - 8.0, 18.0), text: String::new(), placeholder: "Search".into() });
    s.keyboard = keyboard;
    if !keyboard {
        s.tabs = pick(rng, TABS).iter().map(|t| t.to_string()).collect();
    }
    s
}

const QUERIES: &[&str] = &["Hamish & Andy", "jazz", "cat videos", "news today", "pizza", "maps/rome", "what's new?"];

fn scenario(name: String, initial: Screen, actions: Vec<Action>) -> Scenario {
    Scenario { name, initial, actions, hold: HOLD, fps: FPS }
}

fn swipe_screen(rng: &mut ChaCha8Rng, dir: Direction, title: &str) -> (Screen, i64) {
    match dir {
        Direction::Up => (vertical_list(rng, title, 0), rng.gen_range(60..=110)),
        Direction::Down => (vertical_list(rng, title, -150), rng.gen_range(60..=110)),
        Direction::Left => (card_grid(rng, title, 0), rng.gen_range(38..=64)),
        Direction::Right => (card_grid(rng, title, -168), rng.gen_range(38..=64)),
    }
}

pub fn smoke(seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let home = widget_screen(&mut rng, "Home", &["History", "Library", "Settings"], 2);
    let target = home.widgets[0].rect;
    let mut next = widget_screen(&mut rng, "History", &["Today", "Yesterday"], 1);
    next.title = "History".into();
    out.push(scenario("smoke-tap".into(), home, vec![tap(&mut rng, target, Cue::Ripple, next, true, false)]));

    let search = search_screen(&mut rng, true);
    out.push(scenario(
        "smoke-type".into(),
        search,
        vec![Action::Type { text: "Hamish & Andy".into(), suggestions: vec!["Hamish & Andy Show".into(), "Hamish Blake".into()] }],
    ));

    for (name, dir) in [
        ("smoke-swipe-up", Direction::Up),
        ("smoke-swipe-down", Direction::Down),
        ("smoke-swipe-left", Direction::Left),
        ("smoke-swipe-right", Direction::Right),
    ] {
        let (s, d) = swipe_screen(&mut rng, dir, "Browse");
        out.push(scenario(name.into(), s, vec![Action::Swipe { direction: dir, distance: d }]));
    }
    out
}

/// Single-tap recordings with targets spread over all four quadrants.
pub fn train(seed: u64, count: usize) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11);
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < count {
        let labels = distinct_labels(&mut rng, 3);
        let title = *pick(&mut rng, TITLES);
        let icons = rng.gen_range(1..=2);
        let mut screen = widget_screen(&mut rng, title, &labels[1..], icons);
        // a target placed in the quadrant this sample is responsible for
        let q = i % 4;
        let as_icon = rng.gen_bool(0.4);
        let target = place_widget(&mut rng, &quadrant(q), &screen.widgets, if as_icon { None } else { Some(labels[0]) });
        i += 1;
        let Some(target) = target else { continue };
        let rect = target.rect;
        screen.widgets.push(target);
        let next_title = other_title(&mut rng, &screen);
        let next = labeled_screen(&mut rng, &next_title, 2, 1);
        let cue = CUES[(i / 4) % 3];
        out.push(scenario(format!("train-{:03}", out.len()), screen, vec![tap(&mut rng, rect, cue, next, false, false)]));
    }
    out
}

/// Mixed multi-action recordings.
pub fn eval(seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7a1);
    let mut out = Vec::new();
    for j in 0..20 {
        let cue = CUES[j % 3];
        let name = format!("eval-{j:02}");
        let sc = match j % 5 {
            // title-change tap, then scroll the new screen
            0 => {
                let labels = distinct_labels(&mut rng, 3);
                let home = widget_screen(&mut rng, "Home", &labels, 1);
                let target = home.widgets[0].clone();
                let label = target.label.clone().unwrap();
                let (next, d) = swipe_screen(&mut rng, Direction::Up, &label.to_uppercase());
                scenario(name, home, vec![tap(&mut rng, target.rect, cue, next, true, false), Action::Swipe { direction: Direction::Up, distance: d }])
            }
            // tab-bar tap whose label becomes the title, then an icon tap
            1 => {
                let home = labeled_screen(&mut rng, "Home", 2, 2);
                let t = rng.gen_range(1..home.tabs.len());
                let tab_rect = home.tab_rect(t);
                let mut tabbed = labeled_screen(&mut rng, &home.tabs[t].clone(), 2, 2);
                tabbed.tabs = home.tabs.clone();
                let icon = tabbed.widgets.iter().find(|w| w.icon.is_some()).or(tabbed.widgets.last()).unwrap().rect;
                let last_title = other_title(&mut rng, &tabbed);
                let last = labeled_screen(&mut rng, &last_title, 2, 1);
                scenario(name, home, vec![tap(&mut rng, tab_rect, cue, tabbed, false, true), tap(&mut rng, icon, cue, last, false, false)])
            }
            // open the keyboard, type, pick a suggestion
            2 => {
                let closed = search_screen(&mut rng, false);
                let mut open = closed.clone();
                open.keyboard = true;
                open.tabs.clear();
                let field = closed.field.as_ref().unwrap().rect;
                let text = pick(&mut rng, QUERIES).to_string();
                let suggestions = vec![format!("{text} live"), format!("{text} 2"), format!("{text} top")];
                let mut typed = open.clone();
                typed.field.as_mut().unwrap().text = text.clone();
                typed.suggestions = suggestions.clone();
                let pick_rect = typed.suggestion_rect(0);
                let mut result = labeled_screen(&mut rng, "Results", 2, 1);
                result.title = suggestions[0].clone();
                scenario(
                    name,
                    closed,
                    vec![
                        tap(&mut rng, field, cue, open, false, false),
                        Action::Type { text, suggestions },
                        tap(&mut rng, pick_rect, cue, result, true, false),
                    ],
                )
            }
            // horizontal swipe, then open a card
            3 => {
                let dir = if rng.gen_bool(0.5) { Direction::Left } else { Direction::Right };
                let (grid, d) = swipe_screen(&mut rng, dir, "Browse");
                let mut after = grid.clone();
                let (ux, _) = dir.unit();
                after.list.as_mut().unwrap().offset.0 += (ux * d as f64) as i64;
                let (card, _) = after
                    .visible_list_items()
                    .into_iter()
                    .find(|(w, vis)| *vis == w.rect && w.rect.x > 8.0)
                    .expect("a fully visible card");
                let mut detail = labeled_screen(&mut rng, "Card", 2, 1);
                detail.title = card.label.clone().unwrap();
                scenario(name, grid, vec![Action::Swipe { direction: dir, distance: d }, tap(&mut rng, card.rect, cue, detail, true, false)])
            }
            // scroll down, then a title-change tap on a list row
            _ => {
                let (list, d) = swipe_screen(&mut rng, Direction::Down, "Browse");
                let mut after = list.clone();
                after.list.as_mut().unwrap().offset.1 += d;
                let (row, _) = after
                    .visible_list_items()
                    .into_iter()
                    .find(|(w, vis)| *vis == w.rect && w.rect.y > TITLE_H + 30.0)
                    .expect("a fully visible row");
                let mut detail = labeled_screen(&mut rng, "Row", 2, 1);
                detail.title = row.label.clone().unwrap();
                detail.widgets.retain(|w| w.label.as_deref() != row.label.as_deref());
                scenario(name, list, vec![Action::Swipe { direction: Direction::Down, distance: d }, tap(&mut rng, row.rect, cue, detail, true, false)])
            }
        };
        out.push(sc);
    }
    out
}

pub fn builtin_corpus(profile: Profile) -> Vec<Scenario> {
    builtin_corpus_seeded(profile, DEFAULT_SEED)
}

pub fn builtin_corpus_seeded(profile: Profile, seed: u64) -> Vec<Scenario> {
    match profile {
        Profile::Smoke => smoke(seed),
        Profile::Train => train(seed, 50),
        Profile::Eval => eval(seed),
    }
}
