import { ApiClient } from "./api.js";
import { ExplorerApp } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
void new ExplorerApp(root, new ApiClient(base)).start();
