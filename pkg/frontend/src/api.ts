/* Typed client for the clustcube JSON API.
 *
 * Every call returns the parsed payload plus the envelope fields the
 * service stamps on each response (engine_version, snapshot). All panes
 * render numbers straight out of these payloads. */

export type Member = string | number | boolean;

export interface TreeNode {
  label: string;
  kind: "database" | "table" | "cube" | "measures" | "dimensions" | "cuboid";
  children: TreeNode[];
}

export interface RegressionFit {
  beta: number[];
  r2: number;
  rmse: number;
  lambda: number;
  n: number;
  predictor_names?: string[];
}

export interface ChildRef {
  key: Record<string, Member>;
  count: number;
}

export interface CellBrief {
  key: Record<string, Member>;
  count: number;
  k?: number;
  sizes?: number[];
  sse?: number;
  r2?: number;
  rmse?: number;
  fit_n?: number;
  silhouette?: number;
  assignment?: number[];
  insufficient_rows?: boolean;
  regression?: RegressionFit;
  children?: ChildRef[];
  cluster_summary?: { source_key: Member[]; count: number; k: number; centroid: Record<string, number> }[];
}

export interface CellsResponse {
  snapshot: number;
  engine_version: string;
  name: string;
  cuboid: string;
  cells: CellBrief[];
  unplaced_count: number;
  total_objects: number;
}

export interface CuboidInfo {
  name: string;
  dimensions: string[];
  levels: Record<string, string[]>;
  default_cuboid: string;
  default_k: number;
  target: string;
  built: boolean;
  cuboid?: string;
  cells?: number;
}

export interface ClusteringExport {
  k: number;
  seed: number;
  sse: number;
  iterations: number;
  centroids: number[][];
  assignment: number[];
  feature_columns: string[];
  encoding_report: Record<string, { kind: string; mean?: number; std?: number; categories?: string[] }>;
}

export interface CubeExportCell {
  key: Record<string, Member>;
  count: number;
  clustering?: ClusteringExport;
  regression?: RegressionFit;
}

export interface CubeExport {
  cuboid: string;
  dimensions: { name: string; levels: string[]; at: string | null }[];
  cells: CubeExportCell[];
  unplaced_count: number;
  total_objects: number;
}

export interface RollupResponse {
  snapshot: number;
  name: string;
  dim: string;
  mode: string;
  parent_cuboid: string;
  cells: CellBrief[];
  unplaced_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  private session: string | null = null;

  constructor(private readonly baseUrl: string = "") {}

  get hasSession(): boolean {
    return this.session !== null;
  }

  async login(token: string): Promise<{ session: string; expires: string; snapshot: number }> {
    const doc = await this.request("POST", "/api/login", { token }, false);
    this.session = doc.session as string;
    return doc as { session: string; expires: string; snapshot: number };
  }

  tree(): Promise<{ tree: TreeNode[]; snapshot: number }> {
    return this.request("GET", "/api/tree");
  }

  cuboids(): Promise<{ cuboids: CuboidInfo[]; snapshot: number }> {
    return this.request("GET", "/api/cuboids");
  }

  build(name: string, body: { k?: number; seed?: number; min_cell_size?: number; at?: string } = {}) {
    return this.request("POST", `/api/cuboids/${encodeURIComponent(name)}/build`, body);
  }

  cells(name: string, slices: { dim: string; member: string }[] = []): Promise<CellsResponse> {
    const params = slices
      .map((s) => `slice=${encodeURIComponent(`${s.dim}:${s.member}`)}`)
      .join("&");
    const query = params ? `?${params}` : "";
    return this.request("GET", `/api/cuboids/${encodeURIComponent(name)}/cells${query}`);
  }

  cluster(name: string, k: number, seed: number): Promise<{ cells: CellBrief[]; snapshot: number }> {
    return this.request("POST", `/api/cuboids/${encodeURIComponent(name)}/cluster`, { k, seed });
  }

  regress(name: string, target: string, lambda?: number):
      Promise<{ cells: CellBrief[]; overall?: RegressionFit; snapshot: number }> {
    const body: Record<string, unknown> = { target };
    if (lambda !== undefined) body["lambda"] = lambda;
    return this.request("POST", `/api/cuboids/${encodeURIComponent(name)}/regress`, body);
  }

  rollup(name: string, dim: string, mode: "merge_stats" | "recluster" = "merge_stats"):
      Promise<RollupResponse> {
    return this.request("POST", `/api/cuboids/${encodeURIComponent(name)}/rollup`, { dim, mode });
  }

  exportCube(name: string): Promise<{ cube: CubeExport; snapshot: number }> {
    return this.request("GET", `/api/export/${encodeURIComponent(name)}`);
  }

  groundTruth(): Promise<{ ground_truth: { reviews: Record<string, Record<string, number>> } }> {
    return this.request("GET", "/api/ground-truth");
  }

  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  private async request(method: string, path: string, body?: unknown, authed = true): Promise<any> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (authed) {
      if (this.session === null) throw new ApiError(401, "not logged in");
      headers["Authorization"] = `Bearer ${this.session}`;
    }
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let doc: unknown = {};
    try {
      doc = text ? JSON.parse(text) : {};
    } catch {
      throw new ApiError(response.status, text.slice(0, 200));
    }
    if (!response.ok) {
      const detail = (doc as { detail?: unknown }).detail;
      throw new ApiError(response.status,
        typeof detail === "string" ? detail : JSON.stringify(detail ?? doc));
    }
    return doc;
  }
}
