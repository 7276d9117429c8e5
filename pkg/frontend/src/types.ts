// Payload types mirroring the service's HTTP+JSON API exactly.

export type AnnotationLabel = "Specific" | "Ambiguous" | "Generic" | "Risk" | "NA";

export interface QueueItemView {
  sentence_id: string;
  text: string;
  doc_id: string;
  proposed: AnnotationLabel | null;
  confidence: number | null;
  round: number;
  document_link: string;
}

export interface StoredAnnotation {
  sentence_id: string;
  annotator_id: string;
  label: AnnotationLabel;
  round: number;
  timestamp: number;
}

export interface KappaRow {
  annotator_a: string;
  annotator_b: string;
  kappa: number;
  shared: number;
}

export interface StatsPayload {
  corpus_size: number;
  record_count: number;
  annotated_sentences: number;
  resolved_count: number;
  label_distribution: Record<string, number>;
  raw_agreement: number | null;
  kappa: KappaRow[];
  rounds: { round: number; resolved: number; model_version: string }[];
  model_version: string | null;
}

export interface JobStatusPayload {
  job_id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  message: string;
}

export interface RatingEntry {
  doc_id: string;
  score: number;
  rank: number;
  rating: number;
}

export interface RatingsPayload {
  degenerate: boolean;
  entries: RatingEntry[];
}
