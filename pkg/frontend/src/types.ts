// Shapes of the annotation service's JSON payloads, as the server emits them.

export type Phase = "open" | "organize" | "closed";
export type Question = "PCR" | "LCR";
export type LikertAnswer =
  | "strongly_agree"
  | "agree"
  | "disagree"
  | "strongly_disagree";

export const LIKERT_ANSWERS: readonly LikertAnswer[] = [
  "strongly_agree",
  "agree",
  "disagree",
  "strongly_disagree",
];

export interface LabelRef {
  label_id: number;
  name: string;
}

export interface FeatureView {
  feature: number;
  open_texts: string[];
  labels: LabelRef[];
}

export interface FeaturesOverview {
  phase: Phase;
  round: number;
  features: FeatureView[];
}

export interface FeatureDetail extends FeatureView {
  phase: Phase;
  round: number;
}

export interface FeatureImageItem {
  sample_id: string;
  image: string;
  overlay: string;
}

export interface FeatureImages {
  feature: number;
  items: FeatureImageItem[];
}

export interface VocabularyLabel {
  label_id: number;
  name: string;
  features: number; // how many features currently carry it
}

export interface VocabularyView {
  phase: Phase;
  round: number;
  labels: VocabularyLabel[];
}

export type VocabularyEdit =
  | { op: "add"; name: string; description?: string }
  | { op: "rename"; label_id: number; name: string }
  | { op: "delete"; label_id: number }
  | { op: "merge"; sources: number[]; target: number }
  | { op: "split"; label_id: number; names: string[] };

export interface PhaseState {
  phase: Phase;
  round: number;
}

export interface FeatureText {
  feature: number;
  text: string;
}

export interface PcrPayload {
  prompt: string;
  image: string;
  overlays: string[];
  features: FeatureText[];
}

export interface LcrPayload {
  prompt: string;
  label: string;
  features: FeatureText[];
}

export interface Task {
  task_id: string;
  sample_id: string;
  question: Question;
  payload: PcrPayload | LcrPayload;
}

export interface NextTask {
  task: Task | null;
  remaining: number;
}

export interface ConsistencyRecord {
  sample_id: string;
  pcr: number;
  lcr: number;
  icr: number;
  correct: boolean;
}

export interface RecordsView {
  source: string;
  records: ConsistencyRecord[];
}
