//! Deterministic movie-like corpora for desk-scale experiments.
//!
//! Each movie gets a one-paragraph article built from fact sentences
//! (year, director, writer, cast, genre, language) plus cue words that hint
//! at genre and language without naming them. With `consistency < 1` each
//! fact sentence is kept only with that probability, so some answers are
//! missing from the text, while the cue words always remain.
//!
//! A fraction of titles are common phrases ("Love Story") that other
//! articles use in lowercase, which makes plain entity matching pull in
//! unrelated articles.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Corpus, RawArticle, RawCorpus, RawQa, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_movies: usize,
    /// Probability that each fact sentence is written into the article.
    pub consistency: f64,
    /// Fraction of movies titled with a common phrase.
    pub collision_titles: f64,
    /// Probability that an article uses one of those phrases in its body.
    pub collision_rate: f64,
    /// Probability that a person slot is filled from the shared pool of all roles.
    pub role_overlap: f64,
    pub remake_rate: f64,
    pub train_fraction: f64,
    pub dev_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_movies: 200,
            consistency: 1.0,
            collision_titles: 0.1,
            collision_rate: 0.4,
            role_overlap: 0.2,
            remake_rate: 0.1,
            train_fraction: 0.8,
            dev_fraction: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be in [0, 1], got {x}")))
            }
        };
        if self.n_movies < 1 {
            return Err(Error::invalid("n_movies must be at least 1"));
        }
        unit("consistency", self.consistency)?;
        unit("collision_titles", self.collision_titles)?;
        unit("collision_rate", self.collision_rate)?;
        unit("role_overlap", self.role_overlap)?;
        unit("remake_rate", self.remake_rate)?;
        unit("train_fraction", self.train_fraction)?;
        unit("dev_fraction", self.dev_fraction)?;
        if self.train_fraction + self.dev_fraction > 1.0 {
            return Err(Error::invalid("train_fraction + dev_fraction exceeds 1"));
        }
        Ok(())
    }
}

pub const CATEGORIES: [&str; 9] = [
    "movie_to_director",
    "movie_to_writer",
    "movie_to_actors",
    "movie_to_year",
    "movie_to_genre",
    "movie_to_language",
    "director_to_movie",
    "writer_to_movie",
    "actor_to_movie",
];

/// Categories whose answers come from a small closed set.
pub const CHOICE_CATEGORIES: [&str; 2] = ["movie_to_genre", "movie_to_language"];
/// Categories whose answer is a person named in the article.
pub const SPAN_CATEGORIES: [&str; 3] = ["movie_to_director", "movie_to_writer", "movie_to_actors"];

const GENRES: [(&str, &str); 8] = [
    ("Science Fiction", "futuristic"),
    ("Horror", "terrifying"),
    ("Comedy", "hilarious"),
    ("Drama", "poignant"),
    ("Western", "frontier"),
    ("Thriller", "suspenseful"),
    ("Romance", "heartfelt"),
    ("Animation", "animated"),
];

const LANGUAGES: [(&str, &str, f64); 6] = [
    ("English", "hollywood", 0.5),
    ("Hindi", "bollywood", 0.1),
    ("French", "parisian", 0.1),
    ("Spanish", "castilian", 0.1),
    ("Japanese", "tokyo", 0.1),
    ("Italian", "roman", 0.1),
];

const COLLISION_PHRASES: [&str; 24] = [
    "love story",
    "night train",
    "second chance",
    "happy ending",
    "open road",
    "long night",
    "cold case",
    "hidden truth",
    "lost cause",
    "perfect storm",
    "final act",
    "dark secret",
    "true story",
    "new beginning",
    "bad habit",
    "golden age",
    "big adventure",
    "quiet place",
    "family affair",
    "great escape",
    "safe haven",
    "wild ride",
    "broken promise",
    "fresh start",
];

const COLLISION_SENTENCES: [&str; 3] = [
    "Critics called it a {} .",
    "Many viewers saw it as a {} .",
    "At heart the plot is a {} .",
];

const TITLE_ADJECTIVES: [&str; 40] = [
    "Silent",
    "Crimson",
    "Hollow",
    "Iron",
    "Velvet",
    "Distant",
    "Burning",
    "Frozen",
    "Savage",
    "Gentle",
    "Shattered",
    "Electric",
    "Ancient",
    "Restless",
    "Scarlet",
    "Midnight",
    "Emerald",
    "Bitter",
    "Wandering",
    "Silver",
    "Amber",
    "Northern",
    "Twisted",
    "Sacred",
    "Endless",
    "Fading",
    "Rising",
    "Forgotten",
    "Painted",
    "Stolen",
    "Hungry",
    "Brave",
    "Lonely",
    "Mighty",
    "Secret",
    "Thunder",
    "Winter",
    "Copper",
    "Marble",
    "Paper",
];

const TITLE_NOUNS: [&str; 40] = [
    "River",
    "Harbor",
    "Empire",
    "Garden",
    "Mirror",
    "Kingdom",
    "Orchard",
    "Lantern",
    "Canyon",
    "Voyage",
    "Citadel",
    "Meadow",
    "Tower",
    "Horizon",
    "Island",
    "Valley",
    "Compass",
    "Cathedral",
    "Frontier",
    "Monsoon",
    "Serpent",
    "Falcon",
    "Carnival",
    "Labyrinth",
    "Tide",
    "Ember",
    "Prophet",
    "Glacier",
    "Sparrow",
    "Bridge",
    "Desert",
    "Fortress",
    "Circus",
    "Mountain",
    "Station",
    "Planet",
    "Forest",
    "Ocean",
    "Machine",
    "Shadow",
];

const FIRST_NAMES: [&str; 60] = [
    "James", "Maria", "Akira", "Priya", "Lucas", "Elena", "Omar", "Sofia", "Viktor", "Hana",
    "Diego", "Ingrid", "Kwame", "Chloe", "Rafael", "Anika", "Mateo", "Yuki", "Samuel", "Leila",
    "Bruno", "Freya", "Tariq", "Nadia", "Hugo", "Greta", "Ravi", "Camila", "Felix", "Ayumi",
    "Marco", "Olga", "Jonas", "Aisha", "Pablo", "Mira", "Stefan", "Zara", "Emil", "Rosa", "Kenji",
    "Lena", "Arjun", "Clara", "Tomas", "Ines", "Henrik", "Amara", "Dmitri", "Vera", "Luca", "Noor",
    "Anton", "Eva", "Kofi", "Ida", "Milan", "Sana", "Oscar", "Lydia",
];

const LAST_NAMES: [&str; 60] = [
    "Okafor",
    "Lindqvist",
    "Moreau",
    "Tanaka",
    "Kapoor",
    "Delgado",
    "Novak",
    "Brennan",
    "Haddad",
    "Virtanen",
    "Castillo",
    "Weber",
    "Nakamura",
    "Adeyemi",
    "Rossi",
    "Petrov",
    "Albrecht",
    "Mendes",
    "Kowalski",
    "Sato",
    "Iyer",
    "Fontaine",
    "Horvat",
    "Quinlan",
    "Eriksen",
    "Barros",
    "Yilmaz",
    "Duval",
    "Sorensen",
    "Oyelaran",
    "Kimura",
    "Varga",
    "Ferreira",
    "Marchetti",
    "Lund",
    "Abadi",
    "Kovac",
    "Ortega",
    "Holm",
    "Mbeki",
    "Dubois",
    "Fischer",
    "Ricci",
    "Nilsson",
    "Mahler",
    "Bianchi",
    "Santos",
    "Volkov",
    "Jansen",
    "Aziz",
    "Keller",
    "Moreno",
    "Berg",
    "Takahashi",
    "Reyes",
    "Olsen",
    "Pereira",
    "Laine",
    "Costa",
    "Zimmer",
];

struct Movie {
    title: String,
    year: u32,
    genre: usize,
    language: usize,
    director: usize,
    writer: usize,
    actors: [usize; 3],
    remake_of: Option<usize>,
}

/// All first-last combinations in random order, then with middle initials.
fn person_names(rng: &mut rng::Rng, needed: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(needed);
    let mut tier = 0u8;
    while names.len() < needed {
        let mut combos: Vec<String> = Vec::new();
        for f in FIRST_NAMES {
            for l in LAST_NAMES {
                combos.push(if tier == 0 {
                    format!("{f} {l}")
                } else {
                    format!("{f} {} {l}", (b'A' + tier - 1) as char)
                });
            }
        }
        combos.shuffle(rng);
        names.extend(combos.into_iter().take(needed - names.len()));
        tier += 1;
    }
    names
}

fn movie_titles(rng: &mut rng::Rng, n: usize, n_collisions: usize) -> Vec<String> {
    let mut titles = vec!["Blade Runner".to_string()];
    let mut phrases: Vec<&str> = COLLISION_PHRASES.to_vec();
    phrases.shuffle(rng);
    for p in phrases.iter().take(n_collisions.min(n.saturating_sub(1))) {
        titles.push(title_case(p));
    }
    let mut combos: Vec<String> = Vec::new();
    for a in TITLE_ADJECTIVES {
        for b in TITLE_NOUNS {
            combos.push(format!("{a} {b}"));
        }
    }
    combos.shuffle(rng);
    let mut sequel = 1;
    while titles.len() < n {
        let need = n - titles.len();
        if sequel == 1 {
            titles.extend(combos.iter().take(need).cloned());
        } else {
            titles.extend(combos.iter().take(need).map(|c| format!("{c} {sequel}")));
        }
        sequel += 1;
    }
    titles
}

fn title_case(phrase: &str) -> String {
    phrase
        .split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn pick<'a>(rng: &mut rng::Rng, options: &[&'a str]) -> &'a str {
    options[rng.gen_range(0..options.len())]
}

/// Generates the raw corpus; [`synth_corpus`] encodes it.
pub fn synth_raw(config: &SynthConfig) -> Result<RawCorpus> {
    config.validate()?;
    let n = config.n_movies;
    let mut rng = rng::stream(config.seed, rng::SYNTH, 0);

    let n_collisions =
        ((config.collision_titles * n as f64).round() as usize).min(COLLISION_PHRASES.len());
    let titles = movie_titles(&mut rng, n, n_collisions);
    let collision_movies: Vec<usize> = (1..=n_collisions.min(n - 1)).collect();

    let n_directors = (n * 3).div_ceil(4).max(1);
    let n_writers = n_directors;
    let n_actors = (n * 9).div_ceil(4).max(3);
    let canonical = [
        "Ridley Scott",
        "Hampton Fancher",
        "Harrison Ford",
        "Rutger Hauer",
        "Sean Young",
    ];
    let mut people: Vec<String> = canonical.iter().map(|s| s.to_string()).collect();
    people.extend(person_names(&mut rng, n_directors + n_writers + n_actors));
    let directors: Vec<usize> = (canonical.len()..canonical.len() + n_directors).collect();
    let writers: Vec<usize> = (directors.len() + canonical.len()
        ..directors.len() + canonical.len() + n_writers)
        .collect();
    let actors: Vec<usize> = (canonical.len() + n_directors + n_writers..people.len()).collect();

    let draw = |rng: &mut rng::Rng, pool: &[usize]| -> usize {
        if rng.gen_bool(config.role_overlap) {
            rng.gen_range(canonical.len()..people.len())
        } else {
            pool[rng.gen_range(0..pool.len())]
        }
    };

    let language_weights: Vec<f64> = LANGUAGES.iter().map(|l| l.2).collect();
    let language_dist = rand::distributions::WeightedIndex::new(&language_weights)
        .map_err(|e| Error::invalid(e.to_string()))?;

    let mut movies = Vec::with_capacity(n);
    for (i, title) in titles.iter().enumerate() {
        let m = if i == 0 {
            Movie {
                title: title.clone(),
                year: 1982,
                genre: 0,
                language: 0,
                director: 0,
                writer: 1,
                actors: [2, 3, 4],
                remake_of: None,
            }
        } else {
            let mut cast = [0usize; 3];
            for slot in 0..3 {
                loop {
                    let a = draw(&mut rng, &actors);
                    if !cast[..slot].contains(&a) {
                        cast[slot] = a;
                        break;
                    }
                }
            }
            Movie {
                title: title.clone(),
                year: rng.gen_range(1950..=2015),
                genre: rng.gen_range(0..GENRES.len()),
                language: rng.sample(&language_dist),
                director: draw(&mut rng, &directors),
                writer: draw(&mut rng, &writers),
                actors: cast,
                remake_of: rng
                    .gen_bool(config.remake_rate)
                    .then(|| rng.gen_range(0..i)),
            }
        };
        movies.push(m);
    }

    let mut articles = Vec::with_capacity(n);
    for (i, m) in movies.iter().enumerate() {
        let t = &m.title;
        let keep = |rng: &mut rng::Rng| i == 0 || rng.gen_bool(config.consistency);
        let (genre, genre_cue) = GENRES[m.genre];
        let (language, language_cue, _) = LANGUAGES[m.language];
        let mut sentences = vec![format!("{t} is a {language_cue} {genre_cue} film .")];
        if keep(&mut rng) {
            sentences.push(format!("{t} was released in {} .", m.year));
        }
        if keep(&mut rng) {
            sentences.push(format!("{t} was directed by {} .", people[m.director]));
        }
        if keep(&mut rng) {
            sentences.push(format!(
                "The screenplay of {t} was written by {} .",
                people[m.writer]
            ));
        }
        if keep(&mut rng) {
            let [a, b, c] = m.actors.map(|a| people[a].as_str());
            sentences.push(format!("{t} stars {a} , {b} and {c} ."));
        }
        if keep(&mut rng) {
            sentences.push(format!("{t} is a {genre} movie ."));
        }
        if keep(&mut rng) {
            sentences.push(format!("{t} is in {language} ."));
        }
        if let Some(o) = m.remake_of {
            sentences.push(format!("{t} is a remake of {} .", movies[o].title));
        }
        if !collision_movies.is_empty() && rng.gen_bool(config.collision_rate) {
            let c = collision_movies[rng.gen_range(0..collision_movies.len())];
            if c != i {
                let phrase = movies[c].title.to_lowercase();
                sentences.push(pick(&mut rng, &COLLISION_SENTENCES).replace("{}", &phrase));
            }
        }
        let rerelease = rng.gen_range(1950..=2015);
        let other = rng.gen_range(canonical.len()..people.len());
        let text = format!(
            "{}\n\n{t} was restored in {rerelease} by {} .",
            sentences.join(" "),
            people[other]
        );
        articles.push(RawArticle {
            title: t.clone(),
            text,
        });
    }

    let mut qa: Vec<RawQa> = Vec::new();
    let ask = |category: &str, question: String, answers: Vec<String>| RawQa {
        question,
        answers,
        category: Some(category.to_string()),
        split: None,
    };
    for (i, m) in movies.iter().enumerate() {
        let t = &m.title;
        let director_q = if i == 0 {
            "who directed the movie {}?"
        } else {
            pick(
                &mut rng,
                &[
                    "who directed {}?",
                    "who is the director of {}?",
                    "who directed the movie {}?",
                ],
            )
        };
        qa.push(ask(
            "movie_to_director",
            director_q.replace("{}", t),
            vec![people[m.director].clone()],
        ));
        let q = pick(
            &mut rng,
            &[
                "who wrote {}?",
                "who was the writer of {}?",
                "who wrote the screenplay for {}?",
            ],
        );
        qa.push(ask(
            "movie_to_writer",
            q.replace("{}", t),
            vec![people[m.writer].clone()],
        ));
        let q = pick(
            &mut rng,
            &[
                "who starred in {}?",
                "who acted in {}?",
                "who are the actors in {}?",
            ],
        );
        let cast = m.actors.iter().map(|&a| people[a].clone()).collect();
        qa.push(ask("movie_to_actors", q.replace("{}", t), cast));
        let q = pick(
            &mut rng,
            &[
                "when was {} released?",
                "what year was {} released?",
                "in which year did {} come out?",
            ],
        );
        qa.push(ask(
            "movie_to_year",
            q.replace("{}", t),
            vec![m.year.to_string()],
        ));
        let q = pick(
            &mut rng,
            &[
                "what genre is {}?",
                "what kind of film is {}?",
                "what type of movie is {}?",
            ],
        );
        qa.push(ask(
            "movie_to_genre",
            q.replace("{}", t),
            vec![GENRES[m.genre].0.to_string()],
        ));
        let q = pick(
            &mut rng,
            &[
                "what language is {} in?",
                "in which language is {}?",
                "what is the language of {}?",
            ],
        );
        qa.push(ask(
            "movie_to_language",
            q.replace("{}", t),
            vec![LANGUAGES[m.language].0.to_string()],
        ));
    }

    let roles: [(&str, [&str; 3], fn(&Movie) -> Vec<usize>); 3] = [
        (
            "director_to_movie",
            [
                "which movies did {} direct?",
                "{} directed which movies?",
                "what films were directed by {}?",
            ],
            |m| vec![m.director],
        ),
        (
            "writer_to_movie",
            [
                "which movies did {} write?",
                "{} wrote which films?",
                "what films were written by {}?",
            ],
            |m| vec![m.writer],
        ),
        (
            "actor_to_movie",
            [
                "which movies did {} star in?",
                "{} appeared in which films?",
                "what films feature {}?",
            ],
            |m| m.actors.to_vec(),
        ),
    ];
    for (category, templates, holders) in roles {
        let mut filmography: Vec<Vec<usize>> = vec![Vec::new(); people.len()];
        for (i, m) in movies.iter().enumerate() {
            for p in holders(m) {
                filmography[p].push(i);
            }
        }
        for (p, films) in filmography.iter().enumerate() {
            if films.is_empty() {
                continue;
            }
            let q = pick(&mut rng, &templates).replace("{}", &people[p]);
            let answers = films.iter().map(|&f| movies[f].title.clone()).collect();
            qa.push(ask(category, q, answers));
        }
    }

    let mut order: Vec<usize> = (0..qa.len()).collect();
    order.shuffle(&mut rng);
    let n_train = (config.train_fraction * qa.len() as f64).round() as usize;
    let n_dev = (config.dev_fraction * qa.len() as f64).round() as usize;
    for (rank, &i) in order.iter().enumerate() {
        qa[i].split = Some(if rank < n_train {
            Split::Train
        } else if rank < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        });
    }

    let mut used = vec![false; people.len()];
    for m in &movies {
        used[m.director] = true;
        used[m.writer] = true;
        for &a in &m.actors {
            used[a] = true;
        }
    }
    let mut entities: Vec<String> = titles.clone();
    entities.extend(
        people
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(p, _)| p.clone()),
    );
    entities.extend((1950..=2015).map(|y: u32| y.to_string()));
    entities.extend(GENRES.iter().map(|g| g.0.to_string()));
    entities.extend(LANGUAGES.iter().map(|l| l.0.to_string()));

    Ok(RawCorpus {
        entities,
        articles,
        qa,
    })
}

/// Generates and encodes a synthetic corpus.
pub fn synth_corpus(config: &SynthConfig, min_count: u64) -> Result<Corpus> {
    let (corpus, report) = Corpus::build(synth_raw(config)?, min_count)?;
    if report.dropped_qa > 0 || report.duplicate_entities > 0 {
        return Err(Error::contract(format!(
            "generator produced an inconsistent corpus: {report:?}"
        )));
    }
    Ok(corpus)
}
