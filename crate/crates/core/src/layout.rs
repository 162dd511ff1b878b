//! Campaign directory layout:
//!
//! ```text
//! campaign.cfg        key = value campaign config
//! classes.csv         id,name (optional; numbered names otherwise)
//! image_labels.csv    image_id,class_id (optional; derived from labelmaps/)
//! images/{id}.*       image shown to annotators
//! labelmaps/{id}.pgm  ground truth (simulation and derived image labels)
//! scoremaps/{id}.scm  model scores, or {id}.m0.scm, {id}.m1.scm, ... for ensembles
//! answers.log         JSON-lines answer log
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::campaign::{replay, Campaign, CampaignConfig, CampaignError};
use crate::domain::{check_id, ClassId, ImageRecord, LabelMap, ScoreMap};
use crate::formats::{
    read_answer_log, read_class_dictionary, read_image_labels, read_label_map, read_score_map, write_class_dictionary,
    write_image_labels, write_label_map, write_score_map, ClassDictionary, FormatError, TruncatedTail,
};

pub const CONFIG_FILE: &str = "campaign.cfg";
pub const CLASSES_FILE: &str = "classes.csv";
pub const IMAGE_LABELS_FILE: &str = "image_labels.csv";
pub const LOG_FILE: &str = "answers.log";

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

impl LayoutError {
    pub fn is_io(&self) -> bool {
        matches!(self, LayoutError::Format(e) if e.is_io())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignLayout {
    root: PathBuf,
}

impl CampaignLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CampaignLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }

    pub fn classes(&self) -> PathBuf {
        self.root.join(CLASSES_FILE)
    }

    pub fn image_labels(&self) -> PathBuf {
        self.root.join(IMAGE_LABELS_FILE)
    }

    pub fn log(&self) -> PathBuf {
        self.root.join(LOG_FILE)
    }

    pub fn images_dir(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn labelmaps_dir(&self) -> PathBuf {
        self.root.join("labelmaps")
    }

    pub fn scoremaps_dir(&self) -> PathBuf {
        self.root.join("scoremaps")
    }

    pub fn label_map(&self, image_id: &str) -> PathBuf {
        self.labelmaps_dir().join(format!("{image_id}.pgm"))
    }

    /// Image file for `image_id`, whatever its extension.
    pub fn find_image(&self, image_id: &str) -> Option<PathBuf> {
        check_id(image_id).ok()?;
        let mut hits: Vec<PathBuf> = fs::read_dir(self.images_dir())
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_stem().and_then(|s| s.to_str()) == Some(image_id))
            .collect();
        hits.sort();
        hits.into_iter().next()
    }

    /// Score-map paths per image id, ensemble members in member order.
    pub fn score_maps(&self) -> Result<BTreeMap<String, Vec<PathBuf>>, LayoutError> {
        let dir = self.scoremaps_dir();
        let entries = fs::read_dir(&dir).map_err(|e| FormatError::io(&dir, e))?;
        let mut members: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
        for entry in entries {
            let path = entry.map_err(|e| FormatError::io(&dir, e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".scm")) else {
                continue;
            };
            let (id, member) = match name.rsplit_once(".m") {
                Some((id, k)) if k.parse::<usize>().is_ok() => (id.to_string(), k.parse().unwrap()),
                _ => (name.to_string(), 0),
            };
            check_id(&id).map_err(|e| LayoutError::Invalid { path: path.clone(), reason: e.to_string() })?;
            members.entry(id).or_default().push((member, path));
        }
        Ok(members
            .into_iter()
            .map(|(id, mut v)| {
                v.sort();
                (id, v.into_iter().map(|(_, p)| p).collect())
            })
            .collect())
    }
}

/// A campaign directory loaded into memory, before any answers.
#[derive(Debug, Clone)]
pub struct LoadedCampaign {
    pub layout: CampaignLayout,
    pub dictionary: ClassDictionary,
    pub records: Vec<ImageRecord>,
    pub campaign: Campaign,
}

/// Reads config, dictionary, image labels and score maps, and opens round-1
/// questions for every image in id order.
pub fn load_campaign(root: impl Into<PathBuf>) -> Result<LoadedCampaign, LayoutError> {
    load_campaign_with(root, |_| {})
}

/// [`load_campaign`] with `adjust` applied to the stored config first.
pub fn load_campaign_with(
    root: impl Into<PathBuf>,
    adjust: impl FnOnce(&mut CampaignConfig),
) -> Result<LoadedCampaign, LayoutError> {
    let layout = CampaignLayout::new(root);
    let mut config = CampaignConfig::read(layout.config()).map_err(|e| LayoutError::Invalid {
        path: layout.config(),
        reason: e.to_string(),
    })?;
    adjust(&mut config);
    let score_paths = layout.score_maps()?;
    if score_paths.is_empty() {
        return Err(LayoutError::Invalid { path: layout.scoremaps_dir(), reason: "no score maps".into() });
    }
    let mut maps: Vec<(String, Vec<PathBuf>, Vec<ScoreMap>)> = Vec::with_capacity(score_paths.len());
    for (id, paths) in score_paths {
        let loaded = paths.iter().map(read_score_map).collect::<Result<Vec<_>, _>>()?;
        maps.push((id, paths, loaded));
    }
    let classes = maps[0].2[0].classes();
    let dictionary = if layout.classes().exists() {
        read_class_dictionary(layout.classes())?
    } else {
        ClassDictionary::numbered(classes)
    };
    if dictionary.len() != classes {
        return Err(LayoutError::Invalid {
            path: layout.classes(),
            reason: format!("{} classes named, score maps have {classes}", dictionary.len()),
        });
    }
    let explicit = if layout.image_labels().exists() { Some(read_image_labels(layout.image_labels())?) } else { None };

    let mut campaign = Campaign::new(config)?;
    let mut records = Vec::with_capacity(maps.len());
    for (id, paths, ensemble) in maps {
        let gt_path = layout.label_map(&id);
        let image_level_labels: BTreeSet<ClassId> = match &explicit {
            Some(table) => table.get(&id).cloned().unwrap_or_default(),
            None if gt_path.exists() => read_label_map(&gt_path, classes)?.present_classes(),
            None => {
                return Err(LayoutError::Invalid {
                    path: gt_path,
                    reason: format!("no image-level labels for {id}"),
                })
            }
        };
        let record = ImageRecord {
            image_id: id,
            label_map_path: gt_path.exists().then_some(gt_path),
            score_map_paths: paths,
            image_level_labels,
        };
        campaign.add_image(&record, &ensemble)?;
        records.push(record);
    }
    Ok(LoadedCampaign { layout, dictionary, records, campaign })
}

/// Applies `answers.log` to a freshly loaded campaign. A torn final record is
/// reported so the caller can cut it off before appending.
pub fn replay_log(loaded: &mut LoadedCampaign) -> Result<Option<TruncatedTail>, LayoutError> {
    let log = read_answer_log(loaded.layout.log())?;
    let answers: Vec<_> = log.records.iter().map(|r| r.answer()).collect();
    replay(&mut loaded.campaign, &answers)?;
    Ok(log.truncated)
}

/// Ground-truth label maps of every image that has one.
pub fn load_ground_truth(loaded: &LoadedCampaign) -> Result<HashMap<String, LabelMap>, LayoutError> {
    let classes = loaded.dictionary.len();
    loaded
        .records
        .iter()
        .filter_map(|r| r.label_map_path.as_ref().map(|p| (r, p)))
        .map(|(r, p)| Ok((r.image_id.clone(), read_label_map(p, classes)?)))
        .collect()
}

/// One image of a campaign to be written out.
#[derive(Debug, Clone)]
pub struct ImageEntry {
    pub image_id: String,
    pub ground_truth: Option<LabelMap>,
    pub score_maps: Vec<ScoreMap>,
    /// Raw image bytes and file extension.
    pub image: Option<(Vec<u8>, String)>,
    pub image_level_labels: Option<BTreeSet<ClassId>>,
}

/// Writes a campaign directory. Image-level labels go to
/// `image_labels.csv` only when at least one entry sets them.
pub fn write_campaign_dir(
    root: impl AsRef<Path>,
    config: &CampaignConfig,
    dictionary: &ClassDictionary,
    entries: &[ImageEntry],
) -> Result<CampaignLayout, LayoutError> {
    let layout = CampaignLayout::new(root.as_ref());
    for dir in [layout.images_dir(), layout.labelmaps_dir(), layout.scoremaps_dir()] {
        fs::create_dir_all(&dir).map_err(|e| FormatError::io(&dir, e))?;
    }
    fs::write(layout.config(), config.to_string()).map_err(|e| FormatError::io(layout.config(), e))?;
    write_class_dictionary(dictionary, layout.classes())?;
    let mut labels = BTreeMap::new();
    for e in entries {
        check_id(&e.image_id).map_err(|err| LayoutError::Invalid { path: layout.root.clone(), reason: err.to_string() })?;
        if let Some(gt) = &e.ground_truth {
            write_label_map(gt, layout.label_map(&e.image_id))?;
        }
        match e.score_maps.as_slice() {
            [single] => write_score_map(single, layout.scoremaps_dir().join(format!("{}.scm", e.image_id)))?,
            many => {
                for (k, m) in many.iter().enumerate() {
                    write_score_map(m, layout.scoremaps_dir().join(format!("{}.m{k}.scm", e.image_id)))?;
                }
            }
        }
        if let Some((bytes, ext)) = &e.image {
            let path = layout.images_dir().join(format!("{}.{ext}", e.image_id));
            fs::write(&path, bytes).map_err(|err| FormatError::io(&path, err))?;
        }
        if let Some(l) = &e.image_level_labels {
            labels.insert(e.image_id.clone(), l.clone());
        }
    }
    if !labels.is_empty() {
        write_image_labels(&labels, layout.image_labels())?;
    }
    Ok(layout)
}
