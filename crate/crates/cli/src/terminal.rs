//! Line-oriented coding loop: one question per prompt, answers from stdin.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use anyhow::{bail, Result};
use sacode_core::session::{AnswerOutcome, SessionError};
use sacode_core::{Answer, Dataset, Session, Workspace};

const HELP: &str = "y = yes, n = no, u = undo, t TAG[,TAG] = tag last coded item, q = quit";

struct Coder<'a, W: Write> {
    ws: &'a Workspace,
    key: &'a str,
    session: Session,
    out: W,
}

impl<W: Write> Coder<'_, W> {
    /// Runs `f` and appends whatever events it produced to the log.
    fn apply<T>(&mut self, f: impl FnOnce(&mut Session) -> Result<T, SessionError>) -> Result<Option<T>> {
        let before = self.session.events().len();
        match f(&mut self.session) {
            Ok(v) => {
                self.ws.sessions().append(self.key, &self.session.events()[before..])?;
                Ok(Some(v))
            }
            Err(e) => {
                writeln!(self.out, "! {e}")?;
                Ok(None)
            }
        }
    }
}

pub fn code<R: BufRead, W: Write>(
    ws: &Workspace,
    dataset_id: &str,
    coder_id: &str,
    key: &str,
    input: R,
    out: W,
) -> Result<()> {
    let dataset = ws.dataset(dataset_id)?;
    let session = if ws.sessions().exists(key) {
        let s = ws.load_session(key)?;
        if s.dataset_id() != dataset.dataset_id {
            bail!("session `{key}` codes dataset `{}`, not `{dataset_id}`", s.dataset_id());
        }
        s
    } else {
        let s = Session::create(&dataset, ws.tree().clone(), coder_id);
        ws.sessions().create(key, &s)?;
        s
    };
    let mut c = Coder { ws, key, session, out };
    writeln!(
        c.out,
        "session `{key}`: {} of {} items coded\n{HELP}",
        c.session.coded_count(),
        c.session.item_count()
    )?;
    run(&mut c, &dataset, input)?;
    writeln!(
        c.out,
        "session `{key}`: {} of {} items coded",
        c.session.coded_count(),
        c.session.item_count()
    )?;
    Ok(())
}

fn run<R: BufRead, W: Write>(c: &mut Coder<'_, W>, dataset: &Dataset, input: R) -> Result<()> {
    let mut lines = input.lines();
    let mut current: Option<String> = None;
    let mut shown: Option<String> = None;
    let mut done: Vec<String> = Vec::new();
    loop {
        let Some(item_id) = current.clone().or_else(|| c.session.next_pending().map(str::to_string)) else {
            writeln!(c.out, "all items coded")?;
            return Ok(());
        };
        let state = c.session.item_state(&item_id)?;
        if shown.as_deref() != Some(item_id.as_str()) {
            let item = dataset.item(&item_id).expect("session items come from the dataset");
            let position = c.session.items().iter().position(|i| *i == item_id).unwrap_or(0) + 1;
            writeln!(c.out, "\n[{position}/{}] {} ({})", c.session.item_count(), item.item_id, item.category_id)?;
            writeln!(c.out, "  {}", item.text.replace('\n', "\n  "))?;
            if let Some(notes) = &item.notes {
                writeln!(c.out, "  note: {notes}")?;
            }
            shown = Some(item_id.clone());
        }
        let question = state
            .current_question
            .as_ref()
            .and_then(|q| c.session.tree().question(q))
            .expect("unfinished item has a current question");
        write!(c.out, "{}: {}\n> ", question.id, question.text)?;
        c.out.flush()?;

        let Some(line) = lines.next().transpose()? else {
            writeln!(c.out)?;
            return Ok(());
        };
        let line = line.trim();
        let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match cmd.to_ascii_lowercase().as_str() {
            "" => {}
            "q" | "quit" => return Ok(()),
            "?" | "h" | "help" => writeln!(c.out, "{HELP}")?,
            "u" | "undo" => {
                if !state.path.is_empty() {
                    c.apply(|s| s.undo(&item_id))?;
                    current = Some(item_id);
                } else if let Some(prev) = done.pop() {
                    c.apply(|s| s.undo(&prev))?;
                    writeln!(c.out, "reopened {prev}")?;
                    current = Some(prev);
                } else {
                    writeln!(c.out, "! nothing to undo")?;
                }
            }
            "t" | "tag" | "tags" => match done.last().cloned() {
                None => writeln!(c.out, "! no coded item to tag yet")?,
                Some(prev) => {
                    let tags: BTreeSet<String> = rest
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(str::to_string)
                        .collect();
                    if let Some(d) = c.apply(|s| s.set_supplementary_tags(&prev, tags))? {
                        let tags: Vec<&str> = d.supplementary_tags.iter().map(String::as_str).collect();
                        writeln!(c.out, "{prev} tags: [{}]", tags.join(", "))?;
                    }
                }
            },
            other => match Answer::parse(other) {
                None => writeln!(c.out, "! unknown command `{other}` ({HELP})")?,
                Some(a) => match c.apply(|s| s.answer(&item_id, a))? {
                    Some(AnswerOutcome::Finalized { decision }) => {
                        let label = c
                            .session
                            .tree()
                            .leaf(decision.code)
                            .map(|l| l.label.clone())
                            .unwrap_or_default();
                        writeln!(c.out, "=> {} {}: {label}", decision.item_id, decision.code)?;
                        done.push(item_id);
                        current = None;
                    }
                    Some(AnswerOutcome::Next { .. }) => current = Some(item_id),
                    None => {}
                },
            },
        }
    }
}
