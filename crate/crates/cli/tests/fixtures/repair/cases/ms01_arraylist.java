package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void parsesEach() {
        Calc calc = new Calc();
        ArrayList<String> inputs = new ArrayList<>();
        inputs.add("12");
        assertEquals(12, calc.parse(inputs.get(0)));
    }
}
