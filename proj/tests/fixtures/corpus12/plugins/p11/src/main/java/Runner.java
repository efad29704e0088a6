import java.io.FileWriter;

public class Runner {
    public static void main(String[] args) throws Exception {
        // Runtime.getRuntime().exec("calc")
        Process p = Runtime.getRuntime().exec(args[0]);
        FileWriter w = new FileWriter("out.txt");
        w.write("done: \"exec(x)\"");
        w.close();
        char q = '\'';
    }
}
