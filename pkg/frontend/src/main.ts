import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const root = document.getElementById("root");
if (root === null) throw new Error("missing #root container");
new App(root, new ApiClient(base)).start();
